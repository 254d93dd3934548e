//! Classifier that ignores pixels and samples its answer from a configured
//! confusion matrix.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ClassScores, ModelError, FLOOR, NUM_CLASSES};
use crate::pipeline::{ClassMap, Clip};
use crate::scenario::GestureClass;

/// Rows are the true gesture and columns the predicted one, both in
/// [`GestureClass::ALL`] order. `confidence[i][j]` is the `(mean,
/// half_width)` of the uniform confidence drawn when `i` is predicted as `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOracle", into = "RawOracle")]
pub struct NoisyOracleConfig {
    confusion: [[f64; 5]; 5],
    confidence: [[(f64, f64); 5]; 5],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    confusion: [[f64; 5]; 5],
    #[serde(default = "unit_confidence")]
    confidence: [[(f64, f64); 5]; 5],
}

fn unit_confidence() -> [[(f64, f64); 5]; 5] {
    [[(1.0, 0.0); 5]; 5]
}

impl TryFrom<RawOracle> for NoisyOracleConfig {
    type Error = ModelError;

    fn try_from(r: RawOracle) -> Result<Self, Self::Error> {
        NoisyOracleConfig::new(r.confusion, r.confidence)
    }
}

impl From<NoisyOracleConfig> for RawOracle {
    fn from(c: NoisyOracleConfig) -> Self {
        RawOracle { confusion: c.confusion, confidence: c.confidence }
    }
}

impl Default for NoisyOracleConfig {
    fn default() -> Self {
        Self::identity(1.0, 0.0).expect("valid")
    }
}

impl NoisyOracleConfig {
    pub fn new(confusion: [[f64; 5]; 5], confidence: [[(f64, f64); 5]; 5]) -> Result<Self, ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        for (i, row) in confusion.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("confusion row {i} has an entry outside [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("confusion row {i} sums to {sum}"));
            }
        }
        for (i, row) in confidence.iter().enumerate() {
            for (j, &(mean, hw)) in row.iter().enumerate() {
                if !(hw >= 0.0 && mean - hw > 0.0 && mean + hw <= 1.0) {
                    return bad(format!("confidence ({mean}, {hw}) at [{i}][{j}] must stay within (0, 1]"));
                }
            }
        }
        Ok(Self { confusion, confidence })
    }

    /// Always right, with a fixed confidence distribution.
    pub fn identity(mean: f64, half_width: f64) -> Result<Self, ModelError> {
        let mut c = [[0.0; 5]; 5];
        for (i, row) in c.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::new(c, [[(mean, half_width); 5]; 5])
    }

    /// Picks uniformly among all five gestures.
    pub fn uniform(mean: f64, half_width: f64) -> Result<Self, ModelError> {
        Self::new([[0.2; 5]; 5], [[(mean, half_width); 5]; 5])
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::InvalidConfig(e.to_string()))
    }

    pub fn rate(&self, truth: GestureClass, predicted: GestureClass) -> f64 {
        self.confusion[truth.ordinal()][predicted.ordinal()]
    }

    pub fn confidence(&self, truth: GestureClass, predicted: GestureClass) -> (f64, f64) {
        self.confidence[truth.ordinal()][predicted.ordinal()]
    }

    /// Draws a predicted gesture for `truth`.
    pub fn sample<R: Rng + ?Sized>(&self, truth: GestureClass, rng: &mut R) -> GestureClass {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let row = &self.confusion[truth.ordinal()];
        for g in GestureClass::ALL {
            acc += row[g.ordinal()];
            if u < acc {
                return g;
            }
        }
        // Rounding left the cumulative sum just below 1.
        *GestureClass::ALL.iter().rev().find(|g| row[g.ordinal()] > 0.0).expect("row sums to 1")
    }
}

/// Samples a prediction for `truth` and its confidence `c`. The other four
/// mapped gestures get `min((1 - c) / 4, c / 2)`, so the prediction always
/// wins the masked argmax; the unmapped slots get the floor.
pub fn oracle_classify<R: Rng + ?Sized>(
    truth: GestureClass,
    cfg: &NoisyOracleConfig,
    class_map: &ClassMap,
    rng: &mut R,
) -> ClassScores {
    let predicted = cfg.sample(truth, rng);
    let (mean, hw) = cfg.confidence(truth, predicted);
    let c = if hw > 0.0 { rng.gen_range(mean - hw..=mean + hw) } else { mean } as f32;
    let rest = ((1.0 - c) / 4.0).min(c / 2.0);
    let mut out = [FLOOR; NUM_CLASSES];
    for g in GestureClass::ALL {
        out[class_map.index(g)] = if g == predicted { c } else { rest };
    }
    ClassScores::from_array(out).expect("oracle scores lie in [0, 1]")
}

/// Oracle bound to one trial's ground truth and random stream.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    truth: GestureClass,
    cfg: std::sync::Arc<NoisyOracleConfig>,
    class_map: ClassMap,
    rng: ChaCha8Rng,
}

impl OracleClassifier {
    pub fn new(truth: GestureClass, cfg: std::sync::Arc<NoisyOracleConfig>, class_map: ClassMap, rng: ChaCha8Rng) -> Self {
        Self { truth, cfg, class_map, rng }
    }
}

impl Classifier for OracleClassifier {
    fn classify(&mut self, _clip: &Clip) -> Result<ClassScores, ModelError> {
        Ok(oracle_classify(self.truth, &self.cfg, &self.class_map, &mut self.rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::mask_and_argmax;
    use rand::SeedableRng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    #[test]
    fn identity_is_one_hot() {
        let cfg = NoisyOracleConfig::default();
        let map = ClassMap::default();
        let mut r = rng(1);
        for g in GestureClass::ALL {
            let s = oracle_classify(g, &cfg, &map, &mut r);
            for k in 0..5 {
                assert_eq!(s.get(k), if k == map.index(g) { 1.0 } else { 0.0 });
            }
            assert!((5..NUM_CLASSES).all(|k| s.get(k) == FLOOR));
        }
    }

    #[test]
    fn prediction_always_wins_the_argmax() {
        let cfg = NoisyOracleConfig::uniform(0.3, 0.29).unwrap();
        let map = ClassMap::new([7, 3, 26, 0, 11]).unwrap();
        let mut r = rng(2);
        for _ in 0..2000 {
            let s = oracle_classify(GestureClass::Stop, &cfg, &map, &mut r);
            let (g, c) = mask_and_argmax(&s, &map);
            assert_eq!(c, s.get(map.index(g)));
            assert!((0.01..=0.59).contains(&c));
            let others = GestureClass::ALL.iter().filter(|&&h| h != g);
            assert!(others.into_iter().all(|&h| s.get(map.index(h)) < c));
        }
    }

    #[test]
    fn rejects_bad_rows() {
        let mut c = [[0.2; 5]; 5];
        c[2][0] = 0.25;
        assert!(NoisyOracleConfig::new(c, unit_confidence()).is_err());
        assert!(NoisyOracleConfig::identity(0.5, 0.6).is_err());
        assert!(NoisyOracleConfig::identity(0.0, 0.0).is_err());
    }

    #[test]
    fn json_defaults_confidence() {
        let cfg = NoisyOracleConfig::from_json(
            r#"{"confusion":[[1,0,0,0,0],[0,1,0,0,0],[0,0,1,0,0],[0,0,0,1,0],[0,0,0,0,1]]}"#,
        )
        .unwrap();
        assert_eq!(cfg, NoisyOracleConfig::default());
    }
}
