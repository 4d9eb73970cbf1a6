//! Catalog of token-standard functions used as external call targets.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub standard_name: String,
    /// `name(type a, type b)`.
    pub function_signature: String,
    /// `None` for functions without a return value.
    pub return_type: Option<String>,
    pub import_path: String,
    pub read_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnSig {
    pub name: String,
    /// (type, name)
    pub params: Vec<(String, String)>,
}

const TYPES: &[&str] = &["address", "uint256", "bool", "bytes"];

impl FnSig {
    pub fn parse(sig: &str) -> Result<FnSig, String> {
        let open = sig.find('(').ok_or("missing '('")?;
        if !sig.ends_with(')') {
            return Err("missing ')'".into());
        }
        let name = sig[..open].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad function name {name:?}"));
        }
        let inner = sig[open + 1..sig.len() - 1].trim();
        let mut params = Vec::new();
        if !inner.is_empty() {
            for p in inner.split(',') {
                let parts: Vec<&str> = p.split_whitespace().collect();
                match parts.as_slice() {
                    [ty, n] if TYPES.contains(ty) => params.push((ty.to_string(), n.to_string())),
                    _ => return Err(format!("bad parameter {p:?}")),
                }
            }
        }
        Ok(FnSig { name: name.to_string(), params })
    }

    pub fn first_of(&self, ty: &str) -> Option<usize> {
        self.params.iter().position(|(t, _)| t == ty)
    }
}

impl InterfaceSpec {
    pub fn sig(&self) -> FnSig {
        FnSig::parse(&self.function_signature).expect("catalog signatures parse")
    }

    pub fn validate(&self) -> Result<(), String> {
        FnSig::parse(&self.function_signature)?;
        if let Some(rt) = &self.return_type {
            if !["bool", "uint256", "address"].contains(&rt.as_str()) {
                return Err(format!("unsupported return type {rt}"));
            }
        }
        if self.standard_name.is_empty() || self.import_path.is_empty() {
            return Err("empty standard name or import path".into());
        }
        Ok(())
    }

    /// `IERC20.transfer`
    pub fn id(&self) -> String {
        format!("{}.{}", self.standard_name, self.sig().name)
    }

    /// Name of the `address` parameter used when the target is a cast.
    pub fn cast_param_name(&self) -> &'static str {
        match self.standard_name.as_str() {
            "IERC20" => "token",
            "IERC721" => "nft",
            "IERC1155" => "token1155",
            "IERC1363" => "token1363",
            "IERC3156FlashLender" => "lender",
            _ => "target",
        }
    }

    pub fn is_void(&self) -> bool {
        self.return_type.is_none()
    }
}

fn spec(std: &str, path: &str, sig: &str, ret: Option<&str>, ro: bool) -> InterfaceSpec {
    InterfaceSpec {
        standard_name: std.into(),
        function_signature: sig.into(),
        return_type: ret.map(str::to_string),
        import_path: path.into(),
        read_only: ro,
    }
}

pub fn catalog() -> Vec<InterfaceSpec> {
    let erc20 = "@openzeppelin/contracts/token/ERC20/IERC20.sol";
    let erc721 = "@openzeppelin/contracts/token/ERC721/IERC721.sol";
    let erc1155 = "@openzeppelin/contracts/token/ERC1155/IERC1155.sol";
    let erc1363 = "@openzeppelin/contracts/interfaces/IERC1363.sol";
    let lender = "@openzeppelin/contracts/interfaces/IERC3156FlashLender.sol";
    let erc4626 = "@openzeppelin/contracts/interfaces/IERC4626.sol";
    vec![
        spec("IERC20", erc20, "transfer(address to, uint256 amount)", Some("bool"), false),
        spec("IERC20", erc20, "transferFrom(address from, address to, uint256 amount)", Some("bool"), false),
        spec("IERC20", erc20, "approve(address spender, uint256 amount)", Some("bool"), false),
        spec("IERC20", erc20, "balanceOf(address account)", Some("uint256"), true),
        spec("IERC20", erc20, "allowance(address owner, address spender)", Some("uint256"), true),
        spec("IERC20", erc20, "totalSupply()", Some("uint256"), true),
        spec("IERC721", erc721, "safeTransferFrom(address from, address to, uint256 tokenId)", None, false),
        spec("IERC721", erc721, "transferFrom(address from, address to, uint256 tokenId)", None, false),
        spec("IERC721", erc721, "approve(address to, uint256 tokenId)", None, false),
        spec("IERC721", erc721, "ownerOf(uint256 tokenId)", Some("address"), true),
        spec("IERC721", erc721, "balanceOf(address owner)", Some("uint256"), true),
        spec(
            "IERC1155",
            erc1155,
            "safeTransferFrom(address from, address to, uint256 id, uint256 value, bytes data)",
            None,
            false,
        ),
        spec("IERC1155", erc1155, "setApprovalForAll(address operator, bool approved)", None, false),
        spec("IERC1155", erc1155, "balanceOf(address account, uint256 id)", Some("uint256"), true),
        spec("IERC1363", erc1363, "transferAndCall(address to, uint256 value)", Some("bool"), false),
        spec("IERC1363", erc1363, "approveAndCall(address spender, uint256 value)", Some("bool"), false),
        spec(
            "IERC3156FlashLender",
            lender,
            "flashLoan(address receiver, address token, uint256 amount, bytes data)",
            Some("bool"),
            false,
        ),
        spec("IERC3156FlashLender", lender, "maxFlashLoan(address token)", Some("uint256"), true),
        spec("IERC3156FlashLender", lender, "flashFee(address token, uint256 amount)", Some("uint256"), true),
        spec("IERC4626", erc4626, "deposit(uint256 assets, address receiver)", Some("uint256"), false),
        spec("IERC4626", erc4626, "withdraw(uint256 assets, address receiver, address owner)", Some("uint256"), false),
        spec("IERC4626", erc4626, "redeem(uint256 shares, address receiver, address owner)", Some("uint256"), false),
        spec("IERC4626", erc4626, "totalAssets()", Some("uint256"), true),
    ]
}

/// State-changing catalog entries that take both an address and an amount.
pub fn transfer_like() -> Vec<InterfaceSpec> {
    catalog()
        .into_iter()
        .filter(|s| {
            let sig = s.sig();
            !s.read_only && sig.first_of("address").is_some() && sig.first_of("uint256").is_some()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_valid() {
        let c = catalog();
        assert!(c.len() >= 20);
        for s in &c {
            s.validate().unwrap();
        }
        let stds: std::collections::BTreeSet<&str> = c.iter().map(|s| s.standard_name.as_str()).collect();
        assert_eq!(stds.len(), 6);
    }

    #[test]
    fn signature_parsing() {
        let s = FnSig::parse("transfer(address to, uint256 amount)").unwrap();
        assert_eq!(s.name, "transfer");
        assert_eq!(s.params[1], ("uint256".to_string(), "amount".to_string()));
        assert!(FnSig::parse("totalSupply()").unwrap().params.is_empty());
        assert!(FnSig::parse("f(uint8 x)").is_err());
        assert!(FnSig::parse("f(address)").is_err());
        assert!(FnSig::parse("f address x").is_err());
    }

    #[test]
    fn transfer_like_entries_change_state() {
        let t = transfer_like();
        assert!(t.len() >= 10);
        assert!(t.iter().all(|s| !s.read_only));
    }
}
