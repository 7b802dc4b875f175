//! Parameter files: one JSON header line followed by raw little-endian f64s.
//!
//! ```text
//! {"format":"nnopt-params","version":1,"spec":{...},"count":481}\n
//! <count * 8 bytes>
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MlpSpec, NetError, ParamVector};

pub const PARAMS_FORMAT: &str = "nnopt-params";
const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsHeader {
    pub format: String,
    pub version: u32,
    pub spec: MlpSpec,
    pub count: usize,
}

pub fn write_params(path: &Path, spec: &MlpSpec, params: &ParamVector) -> Result<(), NetError> {
    params.check_len(spec)?;
    let header = ParamsHeader {
        format: PARAMS_FORMAT.to_string(),
        version: PARAMS_VERSION,
        spec: spec.clone(),
        count: params.len(),
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let line = serde_json::to_string(&header).map_err(|e| NetError::Header(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    for v in params.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<(MlpSpec, ParamVector), NetError> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: ParamsHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| NetError::Header(e.to_string()))?;
    if header.format != PARAMS_FORMAT || header.version != PARAMS_VERSION {
        return Err(NetError::Header(format!(
            "unsupported format {:?} version {}",
            header.format, header.version
        )));
    }
    header.spec.validate()?;
    if header.count != header.spec.param_count() {
        return Err(NetError::Header(format!(
            "count {} disagrees with spec ({} parameters)",
            header.count,
            header.spec.param_count()
        )));
    }
    let mut bytes = Vec::with_capacity(header.count * 8);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != header.count * 8 {
        return Err(NetError::Header(format!(
            "expected {} payload bytes, found {}",
            header.count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect::<Vec<_>>();
    Ok((header.spec, data.into()))
}
