//! Binary model files.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! "SEMRELAY" | version | role tag | n_dims | dims...
//! n_tensors | { name_len | name (UTF-8) | rank | shape... | f32 LE values }...
//! ```

use std::path::Path;

use crate::autoencoder::{AutoEncoderConfig, AutoEncoderModel};
use crate::codec::{CodecConfig, SemanticCodec};
use crate::error::{Error, Result};
use crate::nn::{ParameterSet, Role, Tensor};

pub const MAGIC: &[u8; 8] = b"SEMRELAY";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Contract(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Serialises `params` with the header dims `dims`. Values are stored as
/// `f32`.
pub fn to_bytes(params: &ParameterSet, dims: &[usize]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(64 + 4 * params.num_values());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&params.role().tag().to_le_bytes());
    put_u32(&mut out, dims.len())?;
    for &d in dims {
        put_u32(&mut out, d)?;
    }
    put_u32(&mut out, params.len())?;
    for (name, t) in params.iter() {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len())?;
        for &s in t.shape() {
            put_u32(&mut out, s)?;
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt(format!("unexpected end of file at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
}

/// Parses a model file, checking the role and header dims.
pub fn from_bytes(buf: &[u8], role: Role, dims: &[usize]) -> Result<ParameterSet> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let tag = r.u32()?;
    let found = Role::from_tag(tag).ok_or_else(|| Error::Corrupt(format!("unknown role tag {tag}")))?;
    if found != role {
        return Err(Error::RoleMismatch {
            expected: role.name().into(),
            found: found.name().into(),
        });
    }
    let n_dims = r.len()?;
    let found_dims = (0..n_dims).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
    if found_dims != dims {
        return Err(Error::DimMismatch {
            expected: dims.to_vec(),
            found: found_dims,
        });
    }
    let mut params = ParameterSet::new(role);
    for _ in 0..r.len()? {
        let name_len = r.len()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Corrupt("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.len()?;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, &s| a.checked_mul(s))
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| Error::Corrupt(format!("tensor {name:?} too large")))?;
        let data = r
            .take(count)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Corrupt(e.to_string()))?;
        params.insert(name, t).map_err(|e| Error::Corrupt(e.to_string()))?;
    }
    if r.pos != buf.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(params)
}

pub fn persist_model(params: &ParameterSet, dims: &[usize], path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(params, dims)?)?;
    Ok(())
}

pub fn load_model(path: &Path, role: Role, dims: &[usize]) -> Result<ParameterSet> {
    from_bytes(&std::fs::read(path)?, role, dims)
}

pub const AE_ENCODER_FILE: &str = "ae_encoder.bin";
pub const AE_DECODER_FILE: &str = "ae_decoder.bin";

pub fn save_autoencoder(model: &AutoEncoderModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let dims = model.config.dims();
    persist_model(&model.encoder, &dims, &dir.join(AE_ENCODER_FILE))?;
    persist_model(&model.decoder, &dims, &dir.join(AE_DECODER_FILE))
}

pub fn load_autoencoder(dir: &Path, config: AutoEncoderConfig) -> Result<AutoEncoderModel> {
    let dims = config.dims();
    let enc = load_model(&dir.join(AE_ENCODER_FILE), Role::AutoEncoder, &dims)?;
    let dec = load_model(&dir.join(AE_DECODER_FILE), Role::AutoDecoder, &dims)?;
    AutoEncoderModel::from_parts(config, enc, dec)
}

/// Writes `<prefix>_sem_encoder.bin` and `<prefix>_sem_decoder.bin`.
pub fn save_codec(codec: &SemanticCodec, dir: &Path, prefix: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let dims = codec.config.dims(codec.vocab_size);
    persist_model(&codec.encoder, &dims, &dir.join(format!("{prefix}_sem_encoder.bin")))?;
    persist_model(&codec.decoder, &dims, &dir.join(format!("{prefix}_sem_decoder.bin")))
}

pub fn load_codec(dir: &Path, prefix: &str, config: CodecConfig, vocab_size: usize) -> Result<SemanticCodec> {
    let dims = config.dims(vocab_size);
    let enc = load_model(
        &dir.join(format!("{prefix}_sem_encoder.bin")),
        Role::SemanticEncoder,
        &dims,
    )?;
    let dec = load_model(
        &dir.join(format!("{prefix}_sem_decoder.bin")),
        Role::SemanticDecoder,
        &dims,
    )?;
    SemanticCodec::from_parts(config, vocab_size, enc, dec)
}
