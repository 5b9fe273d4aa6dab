//! JSON bodies of the sidecar protocol. Images travel as base64 PNG, masks as
//! uncompressed row-major RLE whose first run counts unset pixels.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::raster::ImageRgb;

use super::BackendError;

pub const HEALTH: &str = "/v1/health";
pub const TEXT_ENCODE: &str = "/v1/text/encode";
pub const IMAGE_ENCODE: &str = "/v1/image/encode";
pub const IMAGE_EMBED: &str = "/v1/image/embed";
pub const MASK: &str = "/v1/mask";
pub const STYLIZE: &str = "/v1/stylize";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncodeRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResponse {
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRequest {
    pub image_png_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEncodeResponse {
    pub encoding_id: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRequest {
    pub encoding_id: String,
    pub object_text: String,
    pub text_embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskResponse {
    pub width: u32,
    pub height: u32,
    pub mask_rle: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizeRequest {
    pub image_png_b64: String,
    pub style_text: String,
    pub style_embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub embedding_dim: usize,
}

/// Optional error body a server may attach to a non-200 status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub fn encode_png_b64(img: &ImageRgb) -> Result<String, BackendError> {
    let png = img
        .to_png()
        .map_err(|e| BackendError::InvalidInput(format!("png encode: {e}")))?;
    Ok(STANDARD.encode(png))
}

pub fn decode_png_b64(b64: &str) -> Result<ImageRgb, BackendError> {
    let bytes = STANDARD
        .decode(b64)
        .map_err(|e| BackendError::BadResponse(format!("base64: {e}")))?;
    ImageRgb::from_png(&bytes).map_err(|e| BackendError::BadResponse(format!("png: {e}")))
}

/// Compact JSON with object keys sorted at every level.
pub fn canonicalize(value: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<_> = m.keys().collect();
                keys.sort();
                let mut out = serde_json::Map::new();
                for k in keys {
                    out.insert(k.clone(), sorted(&m[k]));
                }
                Value::Object(out)
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(value)).expect("value serializes")
}

pub fn canonicalize_str(json: &str) -> Result<String, serde_json::Error> {
    Ok(canonicalize(&serde_json::from_str(json)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_sorts_keys() {
        let s = canonicalize_str(r#"{ "b": 1, "a": {"z": [1.0, 2], "y": null} }"#).unwrap();
        assert_eq!(s, r#"{"a":{"y":null,"z":[1.0,2]},"b":1}"#);
    }

    #[test]
    fn png_b64_roundtrip() {
        let img = ImageRgb::filled(3, 2, [1, 2, 3]).unwrap();
        assert_eq!(decode_png_b64(&encode_png_b64(&img).unwrap()).unwrap(), img);
        assert!(matches!(
            decode_png_b64("!!"),
            Err(BackendError::BadResponse(_))
        ));
    }
}
