//! Byte strings as quadratic residues.
//!
//! Bytes `b` become `t = 0x01 || len(b) || b` read as a big-endian integer,
//! which is below `q`; the group element is `t^2 mod p`. Since `p = 3 mod 4`
//! decoding takes `e^((p+1)/4)`, picks the root in `[1, q]` and strips the
//! two-byte prefix.

use num_bigint::BigUint;

use super::GroupParams;
use crate::error::{Error, Result};

pub fn encode_plaintext(params: &GroupParams, bytes: &[u8]) -> Result<BigUint> {
    let cap = params.block_capacity();
    if bytes.len() > cap {
        return Err(Error::Encoding(format!(
            "{} bytes exceed the {cap}-byte block capacity; split into blocks",
            bytes.len()
        )));
    }
    let mut buf = Vec::with_capacity(bytes.len() + 2);
    buf.push(0x01);
    buf.push(bytes.len() as u8);
    buf.extend_from_slice(bytes);
    let t = BigUint::from_bytes_be(&buf);
    Ok(params.mul(&t, &t))
}

pub fn decode_plaintext(params: &GroupParams, element: &BigUint) -> Result<Vec<u8>> {
    if !params.in_subgroup(element) {
        return Err(Error::Encoding("element is not a quadratic residue".into()));
    }
    let exp = (params.p() + 1u32) >> 2;
    let mut root = params.pow(element, &exp);
    if &root > params.q() {
        root = params.p() - root;
    }
    let buf = root.to_bytes_be();
    match buf.as_slice() {
        [0x01, len, rest @ ..] if rest.len() == *len as usize => Ok(rest.to_vec()),
        _ => Err(Error::Encoding("element does not carry an encoded block".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_full_blocks_roundtrip() {
        let params = GroupParams::toy_256();
        let cap = params.block_capacity();
        assert_eq!(cap, 30);
        for len in [0, 1, cap / 2, cap] {
            let bytes: Vec<u8> = (0..len as u8).map(|i| i.wrapping_mul(37) ^ 0xa5).collect();
            let e = encode_plaintext(&params, &bytes).unwrap();
            assert!(params.in_subgroup(&e));
            assert_eq!(decode_plaintext(&params, &e).unwrap(), bytes);
        }
        assert!(encode_plaintext(&params, &vec![0; cap + 1]).is_err());
    }

    #[test]
    fn leading_zero_bytes_survive() {
        let params = GroupParams::toy_64();
        let bytes = [0u8, 0, 7];
        let e = encode_plaintext(&params, &bytes).unwrap();
        assert_eq!(decode_plaintext(&params, &e).unwrap(), bytes);
    }

    #[test]
    fn random_element_is_rejected_as_garbage() {
        let params = GroupParams::toy_256();
        // g itself is a residue but almost surely not a valid encoding
        assert!(decode_plaintext(&params, params.g()).is_err());
    }
}
