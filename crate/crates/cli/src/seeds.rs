//! Seed list parsing: `7`, `1,2,5`, or inclusive `1..10`.

use sgru_core::{Error, Result};

pub fn parse_seed_spec(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(Error::Config("empty seed list".into()));
    }
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = parse_one(lo)?;
        let hi: u64 = parse_one(hi)?;
        if lo > hi {
            return Err(Error::Config(format!("seed range {lo}..{hi} is reversed")));
        }
        return Ok((lo..=hi).collect());
    }
    let mut seeds = Vec::new();
    for part in spec.split(',') {
        seeds.push(parse_one(part)?);
    }
    Ok(seeds)
}

fn parse_one(text: &str) -> Result<u64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid seed `{}`", text.trim())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_seed() {
        assert_eq!(parse_seed_spec("7").unwrap(), vec![7]);
    }

    #[test]
    fn comma_list() {
        assert_eq!(parse_seed_spec("1, 2,5").unwrap(), vec![1, 2, 5]);
    }

    #[test]
    fn inclusive_range() {
        assert_eq!(parse_seed_spec("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seed_spec("4..4").unwrap(), vec![4]);
    }

    #[test]
    fn malformed_specs_fail() {
        assert!(parse_seed_spec("").is_err());
        assert!(parse_seed_spec("3..1").is_err());
        assert!(parse_seed_spec("a").is_err());
        assert!(parse_seed_spec("1,,2").is_err());
        assert!(parse_seed_spec("1..b").is_err());
    }
}
