use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use crate::messages::{CapabilityResponse, EndpointData};
use crate::pki::{CertificateBundle, Signature, SignatureAlgorithm};

/// A registry-signed answer to a lookup.
///
/// `data` holds the exact canonical bytes that `signature` covers, so a
/// verifier never has to re-serialize anything.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointRecord {
    pub data: Vec<u8>,
    pub signature: Signature,
    /// The registry's certificate and its chain.
    pub cert: CertificateBundle,
}

impl EndpointRecord {
    pub fn payload(&self) -> Result<EndpointData, serde_json::Error> {
        serde_json::from_slice(&self.data)
    }

    pub fn to_response(&self) -> CapabilityResponse {
        let payload = self.payload().ok();
        CapabilityResponse {
            endpoint: payload.as_ref().map(|p| p.endpoint.clone()).unwrap_or_default(),
            signature: B64.encode(self.signature.as_bytes()),
            cert: self.cert.to_pem(),
            data: Some(B64.encode(&self.data)),
            algorithm: Some(self.signature.algorithm()),
            ttl: payload.map(|p| p.ttl_seconds),
        }
    }

    /// Rebuilds a record from its wire form. Only decoding happens here;
    /// nothing is trusted until the signature and chain are checked.
    pub fn from_response(resp: &CapabilityResponse) -> Result<Self, String> {
        let data = resp.data.as_deref().ok_or("response carries no signed data")?;
        let data = B64.decode(data).map_err(|e| format!("data: {e}"))?;
        let sig = B64.decode(&resp.signature).map_err(|e| format!("signature: {e}"))?;
        let cert = CertificateBundle::from_pem(&resp.cert).map_err(|e| format!("cert: {e}"))?;
        let algorithm = resp.algorithm.unwrap_or(SignatureAlgorithm::Ed25519);
        Ok(EndpointRecord {
            data,
            signature: Signature::from_parts(algorithm, sig),
            cert,
        })
    }
}
