use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::config::EvalConfig;
use super::embed::{l2_normalize, EmbeddingProvider};
use super::error::{EmbedError, EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Class(usize),
    Negative,
    Part(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub kind: PromptKind,
    pub embedding: Vec<f64>,
}

/// Dataset classes plus optional negative and part prompts, all embedded
/// with unit norm. Prompt order is classes, negatives, parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub classes: Vec<String>,
    pub prompts: Vec<Prompt>,
    pub encoder_id: String,
}

fn embed_prompt(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f64>> {
    let mut v = provider.embed(text).map_err(|source| EvalError::Prompt {
        prompt: text.to_string(),
        source,
    })?;
    if !l2_normalize(&mut v) {
        return Err(EvalError::Prompt {
            prompt: text.to_string(),
            source: EmbedError::ZeroNorm(text.to_string()),
        });
    }
    Ok(v)
}

impl LabelSpace {
    pub fn class_prompts(&self) -> impl Iterator<Item = (usize, &Prompt)> {
        self.prompts.iter().filter_map(|p| match p.kind {
            PromptKind::Class(c) => Some((c, p)),
            _ => None,
        })
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }
}

pub fn build_label_space(classes: &[String], config: &EvalConfig, provider: &dyn EmbeddingProvider) -> Result<LabelSpace> {
    if classes.is_empty() {
        return Err(EvalError::NoClasses);
    }
    let mut seen = HashSet::new();
    for c in classes {
        if !seen.insert(c.as_str()) {
            return Err(EvalError::DuplicateClass(c.clone()));
        }
    }

    let mut prompts = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        prompts.push(Prompt {
            text: c.clone(),
            kind: PromptKind::Class(i),
            embedding: embed_prompt(provider, c)?,
        });
    }
    if config.use_negatives {
        for n in &config.negatives {
            prompts.push(Prompt {
                text: n.clone(),
                kind: PromptKind::Negative,
                embedding: embed_prompt(provider, n)?,
            });
        }
    }
    if config.use_parts {
        for (i, c) in classes.iter().enumerate() {
            let text = config.part_prompt(c);
            let embedding = embed_prompt(provider, &text)?;
            prompts.push(Prompt {
                text,
                kind: PromptKind::Part(i),
                embedding,
            });
        }
    }
    Ok(LabelSpace {
        classes: classes.to_vec(),
        prompts,
        encoder_id: provider.id().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::embed::{dot, HashedEmbedder};

    fn classes(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn negatives_and_parts_extend_the_space() {
        let cfg = EvalConfig {
            use_negatives: true,
            use_parts: true,
            ..Default::default()
        };
        let space = build_label_space(&classes(&["cat", "dog"]), &cfg, &HashedEmbedder::new(32)).unwrap();
        assert_eq!(space.len(), 6);
        let texts: Vec<&str> = space.prompts.iter().map(|p| p.text.as_str()).collect();
        assert_eq!(texts, vec!["cat", "dog", "an object", "a thing", "parts of cat", "parts of dog"]);
        for p in &space.prompts {
            assert!((dot(&p.embedding, &p.embedding) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn plain_space_is_the_class_set() {
        let space = build_label_space(&classes(&["cat", "dog"]), &EvalConfig::default(), &HashedEmbedder::new(8)).unwrap();
        assert_eq!(space.len(), 2);
        assert!(space.prompts.iter().all(|p| matches!(p.kind, PromptKind::Class(_))));
    }

    #[test]
    fn duplicates_and_empty_are_rejected() {
        let e = HashedEmbedder::new(8);
        assert!(matches!(
            build_label_space(&classes(&["cat", "cat"]), &EvalConfig::default(), &e),
            Err(EvalError::DuplicateClass(c)) if c == "cat"
        ));
        assert!(matches!(build_label_space(&[], &EvalConfig::default(), &e), Err(EvalError::NoClasses)));
    }

    #[test]
    fn provider_failure_names_the_prompt() {
        let p = crate::eval::embed::PrecomputedEmbeddings::from_pairs("t", vec![("cat".to_string(), vec![1.0])]).unwrap();
        let err = build_label_space(&classes(&["cat", "dog"]), &EvalConfig::default(), &p).unwrap_err();
        assert!(matches!(err, EvalError::Prompt { prompt, .. } if prompt == "dog"));
    }
}
