//! Sequence-classification model in ONNX format, run with tract.

use std::path::Path;
use std::sync::Arc;

use tokenizers::Tokenizer;
use tract_onnx::prelude::*;

use super::{BiasBackend, ParityFixture, ScoreInput, Stage1Error};

pub struct TransformerBackend {
    model: Arc<TypedRunnableModel>,
    tokenizer: Tokenizer,
    input_count: usize,
    max_tokens: usize,
    biased_index: usize,
    id: String,
}

impl TransformerBackend {
    /// The graph takes `input_ids` (and optionally `attention_mask`) as
    /// `[1, seq]` int64 tensors and returns `[1, classes]` logits.
    pub fn load(
        model_path: &Path,
        tokenizer_path: &Path,
        max_tokens: usize,
        biased_index: usize,
    ) -> Result<Self, Stage1Error> {
        let init = |e: String| Stage1Error::Init(e);
        let fingerprint = ParityFixture::fingerprint(model_path)?;
        let mut tokenizer = Tokenizer::from_file(tokenizer_path)
            .map_err(|e| init(format!("{}: {e}", tokenizer_path.display())))?;
        tokenizer
            .with_truncation(None)
            .map_err(|e| init(format!("tokenizer: {e}")))?;
        tokenizer.with_padding(None);
        let inference = tract_onnx::onnx()
            .model_for_path(model_path)
            .map_err(|e| init(format!("{}: {e:#}", model_path.display())))?;
        let input_count = inference.inputs.len();
        if !(1..=2).contains(&input_count) {
            return Err(init(format!(
                "expected input_ids and optional attention_mask, model has {input_count} inputs"
            )));
        }
        let model = inference
            .into_optimized()
            .and_then(|m| m.into_runnable())
            .map_err(|e| init(format!("{}: {e:#}", model_path.display())))?;
        Ok(Self {
            model,
            tokenizer,
            input_count,
            max_tokens,
            biased_index,
            id: format!("onnx:{}", &fingerprint[..12]),
        })
    }

    /// Token ids with special tokens, at most `max_tokens` long. Over-long
    /// text is cut to a token span centred on `focus` and re-encoded.
    pub fn encode(&self, input: ScoreInput<'_>) -> Result<Vec<u32>, String> {
        let full = self
            .tokenizer
            .encode(input.text, true)
            .map_err(|e| format!("tokenizer: {e}"))?;
        if full.len() <= self.max_tokens {
            return Ok(full.get_ids().to_vec());
        }
        let plain = self
            .tokenizer
            .encode(input.text, false)
            .map_err(|e| format!("tokenizer: {e}"))?;
        let specials = full.len().saturating_sub(plain.len());
        let budget = self.max_tokens.saturating_sub(specials).max(1);
        let offsets = plain.get_offsets();
        let focus_byte = input.focus.unwrap_or(0);
        let focus_tok = offsets
            .iter()
            .position(|&(_, end)| end > focus_byte)
            .unwrap_or(0);
        let end = (focus_tok.saturating_sub(budget / 2) + budget).min(offsets.len());
        let start = end.saturating_sub(budget);
        let (lo, hi) = (offsets[start].0, offsets[end - 1].1);
        let slice = input.text.get(lo..hi).ok_or("token offsets off a char boundary")?;
        let enc = self
            .tokenizer
            .encode(slice, true)
            .map_err(|e| format!("tokenizer: {e}"))?;
        let mut ids = enc.get_ids().to_vec();
        if ids.len() > self.max_tokens {
            let last = *ids.last().unwrap();
            ids.truncate(self.max_tokens - 1);
            ids.push(last);
        }
        Ok(ids)
    }

    fn logits(&self, ids: &[u32]) -> TractResult<Vec<f32>> {
        let n = ids.len();
        let ids: Vec<i64> = ids.iter().map(|&i| i as i64).collect();
        let ids = tract_ndarray::Array2::from_shape_vec((1, n), ids)?;
        let mut inputs: TVec<TValue> = tvec!(Tensor::from(ids).into_tvalue());
        if self.input_count == 2 {
            let mask = tract_ndarray::Array2::<i64>::ones((1, n));
            inputs.push(Tensor::from(mask).into_tvalue());
        }
        let out = self.model.run(inputs)?;
        Ok(out[0].to_plain_array_view::<f32>()?.iter().copied().collect())
    }
}

impl BiasBackend for TransformerBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score(&mut self, input: ScoreInput<'_>) -> Result<f64, String> {
        let ids = self.encode(input)?;
        let logits = self.logits(&ids).map_err(|e| format!("inference: {e:#}"))?;
        if self.biased_index >= logits.len() {
            return Err(format!(
                "biased_label_index {} out of range for {} logits",
                self.biased_index,
                logits.len()
            ));
        }
        Ok(softmax(&logits)[self.biased_index])
    }
}

fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&l| (l as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
