//! Layer geometry tables (`name,m,n,k,s,p` CSV).

use std::path::Path;

use crate::conv::ConvSpec;
use crate::error::{Error, Result};

pub const LAYER_TABLE_HEADER: &str = "name,m,n,k,s,p";

/// Single-channel geometry of every convolution and pooling layer in the
/// DenseNet121 feature extractor for a 224x224 input.
pub const DENSENET121_CSV: &str = include_str!("../data/densenet121.csv");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerConfig {
    pub name: String,
    pub spec: ConvSpec,
}

pub fn parse_layer_table(text: &str) -> Result<Vec<LayerConfig>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    match lines.next() {
        Some((_, header)) if header.trim() == LAYER_TABLE_HEADER => {}
        Some((n, _)) => {
            return Err(Error::parse(
                n,
                format!("expected header '{LAYER_TABLE_HEADER}'"),
            ))
        }
        None => return Err(Error::parse(1, "empty layer table")),
    }

    let mut layers = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                n,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let name = fields[0].to_string();
        if name.is_empty() {
            return Err(Error::parse(n, "empty layer name"));
        }
        let mut dims = [0usize; 5];
        for (slot, (field, label)) in dims
            .iter_mut()
            .zip(fields[1..].iter().zip(["m", "n", "k", "s", "p"]))
        {
            *slot = field
                .parse()
                .map_err(|_| Error::parse(n, format!("invalid {label} '{field}'")))?;
        }
        let spec = ConvSpec::new(dims[0], dims[1], dims[2], dims[3], dims[4]).map_err(|e| {
            Error::Layer {
                name: name.clone(),
                source: Box::new(e),
            }
        })?;
        layers.push(LayerConfig { name, spec });
    }
    Ok(layers)
}

pub fn load_layer_table(path: impl AsRef<Path>) -> Result<Vec<LayerConfig>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    parse_layer_table(&text)
}

/// The built-in DenseNet121 table.
pub fn densenet121() -> Vec<LayerConfig> {
    parse_layer_table(DENSENET121_CSV).expect("bundled layer table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table() {
        let layers = densenet121();
        assert_eq!(layers.len(), 123);
        assert_eq!(layers[0].name, "conv0");
        assert_eq!(layers[0].spec, ConvSpec::new(224, 224, 7, 2, 3).unwrap());
        assert_eq!(layers[1].name, "pool0");
        assert_eq!(layers[1].spec, ConvSpec::new(112, 112, 3, 2, 1).unwrap());
        let pool = layers
            .iter()
            .find(|l| l.name == "transition1.pool")
            .unwrap();
        assert_eq!(pool.spec, ConvSpec::new(56, 56, 2, 2, 0).unwrap());
        assert_eq!(layers.last().unwrap().name, "block4.layer16.conv2");
    }

    #[test]
    fn malformed_row_names_line() {
        let err = parse_layer_table("name,m,n,k,s,p\nconv0,224,224,7,2,3\nx,1,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_layer_table("name,m,n,k,s,p\na,1,2,x,1,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn invalid_spec_names_layer() {
        let err = parse_layer_table("name,m,n,k,s,p\nbad.layer,2,2,5,1,0\n").unwrap_err();
        match err {
            Error::Layer { name, .. } => assert_eq!(name, "bad.layer"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_required() {
        assert!(parse_layer_table("conv0,224,224,7,2,3\n").is_err());
        assert!(parse_layer_table("").is_err());
    }
}
