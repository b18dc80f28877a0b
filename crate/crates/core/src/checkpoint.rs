//! Versioned JSON container for model parameters.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so save/load reproduces every parameter bit for bit. The
//! vocabulary and sense inventory travel with the weights so a checkpoint
//! can be used on its own.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{SenseInventory, Vocabulary};
use crate::discriminator::{DiscriminatorParams, DiscriminatorShape};
use crate::error::{Error, Result};
use crate::generator::{GeneratorParams, GeneratorShape};
use crate::numerics::{Matrix, Parameters};

pub const FORMAT: &str = "pungen-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model_type: ModelType,
    /// Adversarial round the weights were taken after, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    pub vocabulary: Vec<String>,
    pub inventory: SenseInventory,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    fn new<P: Parameters>(
        model_type: ModelType,
        params: &P,
        vocab: &Vocabulary,
        inventory: &SenseInventory,
        round: Option<usize>,
    ) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            model_type,
            round,
            vocabulary: vocab.tokens().to_vec(),
            inventory: inventory.clone(),
            tensors: params
                .named_tensors()
                .into_iter()
                .map(|(name, m)| NamedTensor {
                    name,
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn generator(
        params: &GeneratorParams,
        vocab: &Vocabulary,
        inventory: &SenseInventory,
        round: Option<usize>,
    ) -> Self {
        Self::new(ModelType::Generator, params, vocab, inventory, round)
    }

    pub fn discriminator(
        params: &DiscriminatorParams,
        vocab: &Vocabulary,
        inventory: &SenseInventory,
        round: Option<usize>,
    ) -> Self {
        Self::new(ModelType::Discriminator, params, vocab, inventory, round)
    }

    pub fn vocab(&self) -> Result<Vocabulary> {
        Vocabulary::from_tokens(self.vocabulary.clone(), &self.inventory)
    }

    fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    fn expect_type(&self, want: ModelType) -> Result<()> {
        if self.model_type != want {
            return Err(Error::Checkpoint(format!(
                "expected a {want:?} checkpoint, found {:?}",
                self.model_type
            )));
        }
        Ok(())
    }

    fn restore<P: Parameters>(&self, params: &mut P) -> Result<()> {
        let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                self.tensors.len()
            )));
        }
        for ((name, slot), t) in names.iter().zip(params.tensors_mut()).zip(&self.tensors) {
            if &t.name != name {
                return Err(Error::Checkpoint(format!(
                    "expected tensor `{name}`, found `{}`",
                    t.name
                )));
            }
            if slot.shape() != (t.rows, t.cols) {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` is {}x{}, expected {}x{}",
                    t.rows,
                    t.cols,
                    slot.rows(),
                    slot.cols()
                )));
            }
            *slot = Matrix::from_vec(t.rows, t.cols, t.data.clone())
                .map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))?;
        }
        Ok(())
    }

    pub fn to_generator(&self) -> Result<GeneratorParams> {
        self.expect_type(ModelType::Generator)?;
        let emb = self.tensor("embedding")?;
        let whh = self.tensor("forward.w_hh")?;
        let mut p = GeneratorParams::zeros(GeneratorShape {
            vocab_size: emb.rows,
            embedding_dim: emb.cols,
            hidden: whh.cols,
        });
        self.restore(&mut p)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_discriminator(&self) -> Result<DiscriminatorParams> {
        self.expect_type(ModelType::Discriminator)?;
        let emb = self.tensor("embedding")?;
        let whh = self.tensor("forward.w_hh")?;
        let shape = DiscriminatorShape {
            vocab_size: emb.rows,
            embedding_dim: emb.cols,
            hidden: whh.cols,
        };
        let mut p = DiscriminatorParams::zeros(shape, &self.inventory);
        self.restore(&mut p)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", c.format)));
        }
        if c.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn setup() -> (SenseInventory, Vocabulary) {
        let mut inv = SenseInventory::new();
        inv.insert("bank", "river");
        inv.insert("bank", "money");
        let tokens = [
            "<bos>",
            "<eos>",
            "<unk>",
            "bank",
            "bank#river",
            "bank#money",
            "fish",
        ];
        let vocab =
            Vocabulary::from_tokens(tokens.iter().map(|s| s.to_string()).collect(), &inv).unwrap();
        (inv, vocab)
    }

    #[test]
    fn generator_round_trip_is_bitwise() {
        let (inv, vocab) = setup();
        let shape = GeneratorShape {
            vocab_size: vocab.len(),
            embedding_dim: 3,
            hidden: 2,
        };
        let p = GeneratorParams::init(shape, 0.08, &mut rng::seeded(1));
        let json = Checkpoint::generator(&p, &vocab, &inv, Some(7))
            .to_json()
            .unwrap();
        let c = Checkpoint::from_json(&json).unwrap();
        assert_eq!(c.round, Some(7));
        assert_eq!(c.to_generator().unwrap(), p);
        assert_eq!(c.vocab().unwrap(), vocab);
        assert_eq!(c.to_json().unwrap(), json);
        assert!(matches!(c.to_discriminator(), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn discriminator_round_trip_is_bitwise() {
        let (inv, vocab) = setup();
        let shape = DiscriminatorShape {
            vocab_size: vocab.len(),
            embedding_dim: 2,
            hidden: 3,
        };
        let p = DiscriminatorParams::init(shape, &inv, 0.08, &mut rng::seeded(2));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/disc.json");
        Checkpoint::discriminator(&p, &vocab, &inv, None)
            .save(&path)
            .unwrap();
        let c = Checkpoint::load(&path).unwrap();
        assert_eq!(c.to_discriminator().unwrap(), p);
        assert!(c.to_generator().is_err());
    }

    #[test]
    fn foreign_files_rejected() {
        assert!(Checkpoint::from_json("{}").is_err());
        let (inv, vocab) = setup();
        let p = GeneratorParams::zeros(GeneratorShape {
            vocab_size: vocab.len(),
            embedding_dim: 1,
            hidden: 1,
        });
        let mut c = Checkpoint::generator(&p, &vocab, &inv, None);
        c.version = 99;
        assert!(Checkpoint::from_json(&c.to_json().unwrap()).is_err());
        let mut c = Checkpoint::generator(&p, &vocab, &inv, None);
        c.tensors[0].data.pop();
        assert!(Checkpoint::from_json(&c.to_json().unwrap())
            .unwrap()
            .to_generator()
            .is_err());
    }
}
