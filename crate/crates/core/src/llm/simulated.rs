use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CacheKey, CompletionRequest, Provider, ProviderError, Task};
use crate::text::word_tokens;
use crate::vocab::{self, CHARACTERS, EMOTION_WORDS, FILLER, THEMES, VERBS};

/// Offline provider producing deterministic pseudo-text from a PRNG seeded by
/// the request's cache key.
///
/// * imagination requests get exactly 20 `- ` lines whose
///   emotion words track the mood of the prompt plus a per-sample drift;
/// * summarizer requests get one paragraph sampled from the prompt's words;
/// * classifier requests get a number in [0, 1] (high for relevance, low for
///   explicit-content checks).
#[derive(Debug, Clone)]
pub struct SimulatedProvider {
    name: String,
    drift: f64,
}

impl SimulatedProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            name: format!("simulated:{seed}"),
            drift: 0.25,
        }
    }

    /// Spread of the per-sample valence drift around the prompt's mood.
    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift.max(0.0);
        self
    }

    fn rng(&self, req: &CompletionRequest) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(CacheKey::new(&self.name, req).to_bytes())
    }
}

impl Provider for SimulatedProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        let mut rng = self.rng(req);
        let prompt = &req.user_prompt;
        match req.task {
            Task::Imagine => Ok(imagine(prompt, self.drift, &mut rng)),
            Task::Classify => {
                let score: f64 = if prompt.starts_with("Evaluate the following text") {
                    rng.gen_range(0.0..0.2)
                } else {
                    rng.gen_range(0.75..1.0)
                };
                Ok(format!("{score:.2}"))
            }
            Task::Summarize => Ok(summarize(prompt, &mut rng)),
        }
    }
}

struct Mood {
    valence: f64,
    theme_weights: Vec<f64>,
}

fn read_mood(prompt: &str) -> Mood {
    let tokens = word_tokens(prompt);
    let mut vsum = 0.0;
    let mut vn = 0usize;
    let mut theme_weights = vec![0.5; THEMES.len()];
    for t in &tokens {
        if let Some(v) = vocab::valence_of(t) {
            vsum += v;
            vn += 1;
        }
        for (k, (_, seeds)) in THEMES.iter().enumerate() {
            if seeds.contains(&t.as_str()) {
                theme_weights[k] += 1.0;
            }
        }
    }
    Mood {
        valence: if vn > 0 { vsum / vn as f64 } else { 0.5 },
        theme_weights,
    }
}

fn pick_weighted<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T], weights: &[f64]) -> &'a T {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (item, w) in items.iter().zip(weights) {
        if x < *w {
            return item;
        }
        x -= w;
    }
    items.last().expect("non-empty")
}

fn emotion_near(rng: &mut ChaCha8Rng, target: f64) -> &'static str {
    let weights: Vec<f64> = EMOTION_WORDS
        .iter()
        .map(|(_, v, _)| (-((v - target).abs()) / 0.08).exp())
        .collect();
    pick_weighted(rng, &EMOTION_WORDS, &weights).0
}

fn imagine(prompt: &str, drift: f64, rng: &mut ChaCha8Rng) -> String {
    let mood = read_mood(prompt);
    // Each sample favours one theme of its own on top of the prompt's themes.
    let favourite = rng.gen_range(0..THEMES.len());
    let mut weights = mood.theme_weights.clone();
    weights[favourite] += 3.0;
    let offset = if drift > 0.0 { rng.gen_range(-drift..=drift) } else { 0.0 };
    let slope = if drift > 0.0 { rng.gen_range(-drift..=drift) / 20.0 } else { 0.0 };
    let names: Vec<&str> = CHARACTERS.choose_multiple(rng, 3).copied().collect();

    let mut lines = Vec::with_capacity(20);
    for b in 0..20 {
        let target = (mood.valence + offset + slope * b as f64).clamp(0.0, 1.0);
        let theme_a = pick_weighted(rng, &THEMES, &weights).1;
        let theme_b = pick_weighted(rng, &THEMES, &weights).1;
        let line = format!(
            "- {} {} the {} {} {} and feels {} {} {} {} {} with {}.",
            names[b % names.len()],
            VERBS.choose(rng).unwrap(),
            theme_a.choose(rng).unwrap(),
            FILLER.choose(rng).unwrap(),
            theme_b.choose(rng).unwrap(),
            emotion_near(rng, target),
            FILLER.choose(rng).unwrap(),
            theme_a.choose(rng).unwrap(),
            emotion_near(rng, target),
            FILLER.choose(rng).unwrap(),
            names[(b + 1) % names.len()],
        );
        lines.push(line);
    }
    lines.join("\n")
}

fn summarize(prompt: &str, rng: &mut ChaCha8Rng) -> String {
    let tokens = word_tokens(prompt);
    let keep = (80.0 / tokens.len().max(1) as f64).min(1.0);
    let picked: Vec<&str> = tokens
        .iter()
        .filter(|_| rng.gen_bool(keep))
        .map(String::as_str)
        .collect();
    let mut s = picked.join(" ");
    if s.is_empty() {
        s.push_str("nothing happens");
    }
    let mut chars = s.chars();
    let first = chars.next().unwrap().to_uppercase().collect::<String>();
    format!("{first}{}.", chars.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Task;

    fn imagine_req(tag: &str) -> CompletionRequest {
        CompletionRequest::new(
            Task::Imagine,
            "You are an average book reader.",
            "Here is the first chapter: Mara was joyful with her friend. Then, summarize this plot into a set of 20 simple and distinct bullet points.",
        )
        .temperature(1.0)
        .seed_tag(tag)
    }

    #[test]
    fn imagination_has_twenty_bullets() {
        let p = SimulatedProvider::new(7);
        let out = p.generate(&imagine_req("n=1")).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 20);
        assert!(lines.iter().all(|l| l.starts_with("- ")));
    }

    #[test]
    fn deterministic_per_key_distinct_per_tag() {
        let p = SimulatedProvider::new(7);
        let a = p.generate(&imagine_req("n=3")).unwrap();
        let b = SimulatedProvider::new(7).generate(&imagine_req("n=3")).unwrap();
        assert_eq!(a, b);
        let c = p.generate(&imagine_req("n=1")).unwrap();
        let d = p.generate(&imagine_req("n=2")).unwrap();
        assert_ne!(c, d);
        let e = SimulatedProvider::new(8).generate(&imagine_req("n=3")).unwrap();
        assert_ne!(a, e);
    }

    #[test]
    fn classifier_outputs_parse_into_unit_interval() {
        let p = SimulatedProvider::new(1);
        for prompt in [
            "Please classify ... provide a probability score between 0 and 1.",
            "Evaluate the following text and assist me in determining ... probability score from 0 to 1",
        ] {
            let r = CompletionRequest::new(Task::Classify, "s", prompt);
            let v: f64 = p.generate(&r).unwrap().trim().parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn summary_is_one_paragraph() {
        let p = SimulatedProvider::new(1);
        let r = CompletionRequest::new(Task::Summarize, "s", "Provide an extensive summary of the chapter. The storm came.");
        let out = p.generate(&r).unwrap();
        assert!(!out.trim().is_empty());
        assert!(!out.contains('\n'));
    }

    #[test]
    fn drift_zero_tracks_prompt_mood() {
        let p = SimulatedProvider::new(2).with_drift(0.0);
        let sad = CompletionRequest::new(
            Task::Imagine,
            "s",
            "gloomy sad grieving lonely sad. 20 simple and distinct bullet points.",
        );
        let out = p.generate(&sad).unwrap();
        let vals: Vec<f64> = word_tokens(&out).iter().filter_map(|t| vocab::valence_of(t)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(mean < 0.4, "mean valence {mean}");
    }
}
