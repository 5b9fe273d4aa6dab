use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::raster::{ImageRgb, Mask};

use super::wire::{self, *};
use super::{
    check_text, BackendError, Embedding, EmbeddingSource, ImageEmbedder, ImageEncoder,
    ImageEncoding, MaskGenerator, Stylizer, TextEncoder, EMBEDDING_DIM,
};

/// Blocking client for the sidecar protocol. Cloning shares the connection
/// pool; concurrent requests are allowed.
#[derive(Clone)]
pub struct HttpBackend {
    base: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base", &self.base)
            .finish()
    }
}

impl HttpBackend {
    /// Builds a client without contacting the server.
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        HttpBackend {
            base: endpoint.trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// Builds a client and performs the health handshake; a server reporting
    /// an embedding width other than 512 is rejected.
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, BackendError> {
        let client = Self::new(endpoint, timeout);
        let health = client.health()?;
        if health.status != "ok" {
            return Err(BackendError::BackendUnavailable(format!(
                "health status {:?}",
                health.status
            )));
        }
        if health.embedding_dim != EMBEDDING_DIM {
            return Err(BackendError::BadResponse(format!(
                "server embedding_dim {} != {EMBEDDING_DIM}",
                health.embedding_dim
            )));
        }
        Ok(client)
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    pub fn health(&self) -> Result<HealthResponse, BackendError> {
        let resp = self
            .agent
            .get(format!("{}{}", self.base, wire::HEALTH))
            .call()
            .map_err(transport)?;
        read_response(resp, "")
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
        context: &str,
    ) -> Result<Resp, BackendError> {
        let bytes = serde_json::to_vec(body).expect("request serializes");
        let resp = self
            .agent
            .post(format!("{}{}", self.base, path))
            .header("content-type", "application/json")
            .send(&bytes[..])
            .map_err(transport)?;
        read_response(resp, context)
    }
}

fn transport(e: ureq::Error) -> BackendError {
    BackendError::BackendUnavailable(e.to_string())
}

fn read_response<T: DeserializeOwned>(
    resp: ureq::http::Response<ureq::Body>,
    context: &str,
) -> Result<T, BackendError> {
    let status = resp.status().as_u16();
    let body = resp
        .into_body()
        .read_to_string()
        .map_err(|e| BackendError::BadResponse(format!("reading body: {e}")))?;
    let detail = || {
        serde_json::from_str::<ErrorBody>(&body)
            .map(|b| b.error)
            .unwrap_or_else(|_| body.clone())
    };
    match status {
        200 => serde_json::from_str(&body)
            .map_err(|e| BackendError::BadResponse(format!("{e}: {body:.200}"))),
        400 => Err(BackendError::InvalidInput(detail())),
        404 => Err(BackendError::UnknownEncoding(context.to_string())),
        422 => Err(BackendError::EmptyMask {
            object: context.to_string(),
        }),
        503 => Err(BackendError::BackendUnavailable(detail())),
        other => Err(BackendError::BadResponse(format!(
            "unexpected status {other}: {}",
            detail()
        ))),
    }
}

impl TextEncoder for HttpBackend {
    fn encode_text(&self, text: &str) -> Result<Embedding, BackendError> {
        check_text(text)?;
        let req = TextEncodeRequest {
            text: text.to_string(),
        };
        let resp: EmbeddingResponse = self.post(wire::TEXT_ENCODE, &req, text)?;
        Embedding::new(resp.embedding, EmbeddingSource::Text)
    }
}

impl ImageEncoder for HttpBackend {
    fn encode_image(&self, img: &ImageRgb) -> Result<ImageEncoding, BackendError> {
        let req = ImageRequest {
            image_png_b64: encode_png_b64(img)?,
        };
        let resp: ImageEncodeResponse = self.post(wire::IMAGE_ENCODE, &req, "")?;
        if resp.encoding_id.is_empty() {
            return Err(BackendError::BadResponse("empty encoding_id".into()));
        }
        if (resp.width, resp.height) != img.dims() {
            return Err(BackendError::DimensionMismatch {
                expected: img.dims(),
                actual: (resp.width, resp.height),
            });
        }
        Ok(ImageEncoding {
            encoding_id: resp.encoding_id,
            width: resp.width,
            height: resp.height,
        })
    }
}

impl ImageEmbedder for HttpBackend {
    fn embed_image(&self, img: &ImageRgb) -> Result<Embedding, BackendError> {
        let req = ImageRequest {
            image_png_b64: encode_png_b64(img)?,
        };
        let resp: EmbeddingResponse = self.post(wire::IMAGE_EMBED, &req, "")?;
        Embedding::new(resp.embedding, EmbeddingSource::ImageCrop)
    }
}

impl MaskGenerator for HttpBackend {
    fn generate_mask(
        &self,
        enc: &ImageEncoding,
        object_text: &str,
        text_emb: &Embedding,
    ) -> Result<Mask, BackendError> {
        check_text(object_text)?;
        let req = MaskRequest {
            encoding_id: enc.encoding_id.clone(),
            object_text: object_text.to_string(),
            text_embedding: text_emb.values().to_vec(),
        };
        let resp: MaskResponse =
            self.post(wire::MASK, &req, &enc.encoding_id)
                .map_err(|e| match e {
                    BackendError::EmptyMask { .. } => BackendError::EmptyMask {
                        object: object_text.to_string(),
                    },
                    other => other,
                })?;
        if (resp.width, resp.height) != (enc.width, enc.height) {
            return Err(BackendError::DimensionMismatch {
                expected: (enc.width, enc.height),
                actual: (resp.width, resp.height),
            });
        }
        let mask = Mask::from_rle(resp.width, resp.height, &resp.mask_rle)
            .map_err(|e| BackendError::BadResponse(e.to_string()))?;
        if mask.is_empty() {
            return Err(BackendError::EmptyMask {
                object: object_text.to_string(),
            });
        }
        Ok(mask)
    }
}

impl Stylizer for HttpBackend {
    fn stylize(
        &self,
        img: &ImageRgb,
        style_phrase: &str,
        style_emb: &Embedding,
    ) -> Result<ImageRgb, BackendError> {
        check_text(style_phrase)?;
        let req = StylizeRequest {
            image_png_b64: encode_png_b64(img)?,
            style_text: style_phrase.to_string(),
            style_embedding: style_emb.values().to_vec(),
        };
        let resp: ImageRequest = self.post(wire::STYLIZE, &req, style_phrase)?;
        let out = decode_png_b64(&resp.image_png_b64)?;
        if out.dims() != img.dims() {
            return Err(BackendError::DimensionMismatch {
                expected: img.dims(),
                actual: out.dims(),
            });
        }
        Ok(out)
    }
}
