//! Δ quantization and the bit-exact wire format of an MRE signal.
//!
//! A signal is packed as four fields, in this order, each written most
//! significant bit first:
//!
//! | field   | width                              | content                         |
//! |---------|------------------------------------|---------------------------------|
//! | `s`     | `d·⌈log₂ K⌉`                       | coarse index per axis           |
//! | `level` | `⌈log₂(t+1)⌉`                      | refinement level `l`            |
//! | `index` | `d·t`                              | level-`l` index per axis, `t` bits each, high bits zero |
//! | `Δ`     | `d·⌈log₂(2·steps_l + 1)⌉`          | quantizer code per axis         |
//!
//! `K` is the number of coarse points per axis and `steps_l` the number of
//! quantizer cells at level `l`. Bit `k` of the stream is stored in bit
//! `k mod 8` (least significant first) of byte `⌊k/8⌋`; the final byte is
//! zero-padded. There is no header: every width is derived from the
//! parameters and the decoded level.

mod quantizer;
pub mod wire;

pub use quantizer::{quantizer_for_level, quantizer_for_level_scaled, QuantizerSpec, Rounding};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multigrid::{GridAddress, MreParams};
use wire::{put, take, width_for, Bits};

/// Budget constant `c` in `c·d·⌈log₂(mn)⌉`.
pub const BUDGET_FACTOR: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub rounding: Rounding,
    /// Multiplies the Δ ranges and accuracy, for losses whose gradients
    /// exceed the unit bound.
    pub loss_scale: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig { rounding: Rounding::Stochastic, loss_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signal {
    pub s_index: Vec<u64>,
    pub addr: GridAddress,
    pub delta_q: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSignal {
    pub bits: Bits,
}

impl EncodedSignal {
    pub fn bit_length(&self) -> usize {
        self.bits.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.as_raw_slice().to_vec()
    }

    pub fn from_bytes(bytes: &[u8], bit_length: usize) -> Result<Self> {
        if bit_length > bytes.len() * 8 || bit_length + 8 <= bytes.len() * 8 {
            return Err(Error::Decode(format!("{} bytes cannot hold exactly {bit_length} bits", bytes.len())));
        }
        let mut bits = Bits::from_slice(bytes);
        bits.truncate(bit_length);
        Ok(EncodedSignal { bits })
    }

    /// `0`/`1` characters in stream order.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        let mut bits = Bits::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() || c == '_' => {}
                c => return Err(Error::Decode(format!("unexpected character {c:?} in bit string"))),
            }
        }
        Ok(EncodedSignal { bits })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldSpan {
    pub name: String,
    pub start: usize,
    pub width: u32,
    pub value: u64,
}

/// Quantizers and field widths for one parameter set.
#[derive(Debug, Clone)]
pub struct Codec {
    params: MreParams,
    config: CodecConfig,
    quantizers: Vec<QuantizerSpec>,
    s_width: u32,
    level_width: u32,
    delta_widths: Vec<u32>,
}

impl Codec {
    pub fn new(params: &MreParams, config: CodecConfig) -> Result<Self> {
        if !(config.loss_scale > 0.0 && config.loss_scale.is_finite()) {
            return Err(Error::InvalidParameter("loss_scale must be positive".into()));
        }
        let quantizers: Vec<QuantizerSpec> =
            (0..=params.t).map(|l| quantizer_for_level_scaled(params, l, config.loss_scale)).collect();
        let delta_widths = quantizers.iter().map(|q| width_for(q.max_code() + 1)).collect();
        Ok(Codec {
            params: params.clone(),
            config,
            quantizers,
            s_width: width_for(params.coarse_per_axis),
            level_width: width_for(params.t as u64 + 1),
            delta_widths,
        })
    }

    pub fn params(&self) -> &MreParams {
        &self.params
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn quantizer(&self, level: u32) -> &QuantizerSpec {
        &self.quantizers[level as usize]
    }

    /// Encoded length of every signal at `level`.
    pub fn bit_length(&self, level: u32) -> usize {
        let d = self.params.d;
        d * self.s_width as usize
            + self.level_width as usize
            + d * self.params.t as usize
            + d * self.delta_widths[level as usize] as usize
    }

    pub fn max_bit_length(&self) -> usize {
        (0..=self.params.t).map(|l| self.bit_length(l)).max().unwrap_or(0)
    }

    /// `c·d·⌈log₂(mn)⌉` with `c` = [`BUDGET_FACTOR`].
    pub fn budget_bits(&self) -> usize {
        BUDGET_FACTOR as usize * self.params.d * self.params.log_mn.ceil() as usize
    }

    /// The smallest `c` for which the longest signal fits in `c·d·⌈log₂(mn)⌉`.
    pub fn measured_factor(&self) -> f64 {
        self.max_bit_length() as f64 / (self.params.d as f64 * self.params.log_mn.ceil())
    }

    pub fn validate(&self, sig: &Signal) -> Result<()> {
        let d = self.params.d;
        if sig.s_index.len() != d || sig.delta_q.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if sig.s_index.len() != d { sig.s_index.len() } else { sig.delta_q.len() },
            });
        }
        if let Some(k) = sig.s_index.iter().find(|&&k| k >= self.params.coarse_per_axis) {
            return Err(Error::InvalidAddress(format!("coarse index {k} out of range")));
        }
        sig.addr.validate(&self.params)?;
        let top = self.quantizer(sig.addr.level).max_code();
        if let Some(c) = sig.delta_q.iter().find(|&&c| c > top) {
            return Err(Error::InvalidParameter(format!("Δ code {c} exceeds {top}")));
        }
        Ok(())
    }

    pub fn encode(&self, sig: &Signal) -> Result<EncodedSignal> {
        self.validate(sig)?;
        let level = sig.addr.level;
        let mut bits = Bits::with_capacity(self.bit_length(level));
        for &k in &sig.s_index {
            put(&mut bits, k, self.s_width);
        }
        put(&mut bits, level as u64, self.level_width);
        for &i in &sig.addr.index {
            put(&mut bits, i, self.params.t);
        }
        for &c in &sig.delta_q {
            put(&mut bits, c, self.delta_widths[level as usize]);
        }
        debug_assert_eq!(bits.len(), self.bit_length(level));
        Ok(EncodedSignal { bits })
    }

    pub fn decode(&self, enc: &EncodedSignal) -> Result<Signal> {
        Ok(self.decode_spans(enc)?.0)
    }

    fn decode_spans(&self, enc: &EncodedSignal) -> Result<(Signal, Vec<FieldSpan>)> {
        let d = self.params.d;
        let bits = enc.bits.as_bitslice();
        let header = d * self.s_width as usize + self.level_width as usize;
        if bits.len() < header {
            return Err(Error::Decode(format!("{} bits is shorter than the {header}-bit prefix", bits.len())));
        }
        let mut spans = Vec::new();
        let mut pos = 0;
        let mut field = |name: String, width: u32, pos: &mut usize| {
            let start = *pos;
            let value = take(bits, pos, width);
            spans.push(FieldSpan { name, start, width, value });
            value
        };
        let s_index: Vec<u64> = (0..d).map(|j| field(format!("s[{j}]"), self.s_width, &mut pos)).collect();
        let level = field("level".into(), self.level_width, &mut pos);
        if level > self.params.t as u64 {
            return Err(Error::Decode(format!("level {level} exceeds t = {}", self.params.t)));
        }
        let level = level as u32;
        let expected = self.bit_length(level);
        if bits.len() != expected {
            return Err(Error::Decode(format!("level {level} signal must be {expected} bits, got {}", bits.len())));
        }
        let index: Vec<u64> = (0..d).map(|j| field(format!("index[{j}]"), self.params.t, &mut pos)).collect();
        let width = self.delta_widths[level as usize];
        let delta_q: Vec<u64> = (0..d).map(|j| field(format!("delta[{j}]"), width, &mut pos)).collect();
        let sig = Signal { s_index, addr: GridAddress { level, index }, delta_q };
        self.validate(&sig).map_err(|e| Error::Decode(e.to_string()))?;
        Ok((sig, spans))
    }

    /// Field-by-field decomposition of an encoded signal.
    pub fn dump(&self, enc: &EncodedSignal) -> Result<Vec<FieldSpan>> {
        Ok(self.decode_spans(enc)?.1)
    }

    /// Reconstructed Δ of a decoded signal.
    pub fn dequantize(&self, sig: &Signal) -> Vec<f64> {
        self.quantizer(sig.addr.level).dequantize(&sig.delta_q)
    }
}
