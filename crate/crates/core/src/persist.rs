//! Versioned JSON envelope shared by every serialized model.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    version: u32,
    model: T,
}

pub fn save<T: Serialize, W: Write>(kind: &str, model: &T, out: W) -> Result<()> {
    serde_json::to_writer(
        out,
        &Envelope {
            kind: kind.to_string(),
            version: FORMAT_VERSION,
            model,
        },
    )?;
    Ok(())
}

pub fn load<T: DeserializeOwned, R: Read>(kind: &str, input: R) -> Result<T> {
    let envelope: Envelope<serde_json::Value> = serde_json::from_reader(input)?;
    if envelope.version != FORMAT_VERSION {
        return Err(Error::ModelVersion(envelope.version));
    }
    if envelope.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "expected a serialized {kind}, found {}",
            envelope.kind
        )));
    }
    Ok(serde_json::from_value(envelope.model)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_checks() {
        let mut buf = Vec::new();
        save("pair", &(1u32, 2.5f64), &mut buf).unwrap();
        let back: (u32, f64) = load("pair", buf.as_slice()).unwrap();
        assert_eq!(back, (1, 2.5));
        assert!(matches!(
            load::<(u32, f64), _>("other", buf.as_slice()),
            Err(Error::InvalidConfig(_))
        ));
        let future = br#"{"kind":"pair","version":9,"model":[1,2.5]}"#;
        assert!(matches!(
            load::<(u32, f64), _>("pair", &future[..]),
            Err(Error::ModelVersion(9))
        ));
    }
}
