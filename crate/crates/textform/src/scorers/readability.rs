//! Flesch-Kincaid grade level with heuristic syllable counting.
//!
//! Grade = `0.39 * words + 11.8 * (syllables / words) - 15.59` for a single
//! sentence. The syllable counter is a fixed vowel-group heuristic whose
//! outputs are frozen by fixture tests, so readability scores stay
//! reproducible across releases.

use crate::textcore::Sentence;

use super::ScoreError;

const VOWELS: [char; 6] = ['a', 'e', 'i', 'o', 'u', 'y'];

fn is_vowel(c: char) -> bool {
    VOWELS.contains(&c)
}

/// Count syllables in a normalized word: maximal runs of `[aeiouy]`, minus
/// one for a terminal silent "e" (kept when the word ends in "le" after a
/// consonant), floored at 1. Non-alphabetic tokens count 1 by convention.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .flat_map(|c| c.to_lowercase())
        .filter(|c| c.is_alphabetic())
        .collect();
    if letters.is_empty() {
        return 1;
    }
    let mut runs = 0usize;
    let mut in_run = false;
    for &c in &letters {
        if is_vowel(c) {
            if !in_run {
                runs += 1;
            }
            in_run = true;
        } else {
            in_run = false;
        }
    }
    let n = letters.len();
    if letters[n - 1] == 'e' {
        let silent_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !silent_le {
            runs = runs.saturating_sub(1);
        }
    }
    runs.max(1)
}

/// Flesch-Kincaid grade for one sentence. Only tokens containing an
/// alphanumeric character count as words.
pub fn fk_grade(sentence: &Sentence) -> Result<f64, ScoreError> {
    let words: Vec<&str> = sentence
        .tokens()
        .iter()
        .filter(|t| t.is_word())
        .map(|t| t.normalized())
        .collect();
    if words.is_empty() {
        return Err(ScoreError::NoWords);
    }
    let w = words.len() as f64;
    let syllables: usize = words.iter().map(|t| count_syllables(t)).sum();
    Ok(0.39 * w + 11.8 * (syllables as f64 / w) - 15.59)
}

pub const GRADE_CAP_DEFAULT: f64 = 18.0;

/// Normalized readability `r_d = clamp(fk_grade / grade_cap, 0, 1)`.
pub fn readability_score(sentence: &Sentence, grade_cap: f64) -> Result<f64, ScoreError> {
    let grade = fk_grade(sentence)?;
    Ok((grade / grade_cap).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textcore::tokenize;

    #[test]
    fn syllables_hand_applied() {
        assert_eq!(count_syllables("cat"), 1);
        // Runs: ea, a, i, i, y.
        assert_eq!(count_syllables("readability"), 5);
        // Terminal "le" after consonant keeps its syllable.
        assert_eq!(count_syllables("table"), 2);
        // Terminal silent e: th[e] -> 0 runs left, floored to 1.
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("make"), 1);
        assert_eq!(count_syllables("18"), 1);
        assert_eq!(count_syllables("synchronise"), 3);
    }

    #[test]
    fn fk_hand_arithmetic() {
        let s = tokenize("the cat sat on the mat").unwrap();
        let g = fk_grade(&s).unwrap();
        assert!((g - (0.39 * 6.0 + 11.8 * 1.0 - 15.59)).abs() < 1e-12);
    }

    #[test]
    fn fk_monotone_in_syllables() {
        // A sentence with the same word count but doubled syllable load
        // scores strictly higher.
        let short = tokenize("the cat sat on the mat").unwrap();
        let long = tokenize("heavy brazen muskets over yonder valley").unwrap();
        assert!(fk_grade(&long).unwrap() > fk_grade(&short).unwrap());
    }

    #[test]
    fn fk_punctuation_only_errors() {
        let s = tokenize("! ?").unwrap();
        assert!(matches!(fk_grade(&s), Err(ScoreError::NoWords)));
    }

    #[test]
    fn readability_clamps() {
        let s = tokenize("the cat sat on the mat").unwrap();
        // Grade -1.45 clamps to the floor.
        assert_eq!(readability_score(&s, 18.0).unwrap(), 0.0);
    }

    #[test]
    fn readability_midpoint() {
        // grade 9.0 with cap 18 -> 0.5; pick a synthetic check on the
        // formula directly since grades are sentence-derived.
        let r = (9.0f64 / 18.0).clamp(0.0, 1.0);
        assert!((r - 0.5).abs() < 1e-12);
    }
}
