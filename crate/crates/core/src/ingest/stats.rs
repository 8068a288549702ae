//! Per (agent, gender) conversation statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ConversationRow;
use crate::domain::{GenderClass, Speaker};

/// The fixed 127-word English stopword list shipped in `data/stopwords.txt`.
pub fn stopwords() -> &'static BTreeSet<&'static str> {
    static LIST: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    LIST.get_or_init(|| include_str!("../../data/stopwords.txt").lines().filter(|l| !l.is_empty()).collect())
}

/// Whitespace tokens with punctuation stripped; tokens that were pure
/// punctuation disappear.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.chars().filter(|c| !c.is_ascii_punctuation()).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Summary { avg: values.iter().sum::<f64>() / values.len() as f64, min, max, n: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub agent: Speaker,
    pub gender: GenderClass,
    pub conversations: usize,
    pub words_per_utterance: Option<Summary>,
    pub stopwords_per_utterance: Option<Summary>,
    pub utterances_per_conversation: Option<Summary>,
    pub turns_per_conversation: Option<Summary>,
}

/// Number of full user/chatbot alternations: speaker blocks halved, rounded
/// down.
pub fn turns(conversation: &[&ConversationRow]) -> usize {
    let mut blocks = 0;
    let mut last = None;
    for r in conversation {
        if last != Some(r.ub) {
            blocks += 1;
            last = Some(r.ub);
        }
    }
    blocks / 2
}

/// Statistics over the `original` text of each row, grouped by
/// `(agent, user gender)`. A conversation counts towards both agents of its
/// gender, with zero utterances for an absent agent.
pub fn conversation_stats(rows: &[ConversationRow]) -> Vec<AgentStats> {
    let stop = stopwords();
    let mut convs: BTreeMap<u64, Vec<&ConversationRow>> = BTreeMap::new();
    for r in rows {
        convs.entry(r.c_num).or_default().push(r);
    }
    let mut genders: BTreeMap<GenderClass, Vec<&[&ConversationRow]>> = BTreeMap::new();
    for conv in convs.values() {
        genders.entry(conv[0].user_gender).or_default().push(conv.as_slice());
    }
    let mut out = Vec::new();
    for (gender, convs) in genders {
        for agent in [Speaker::User, Speaker::Chatbot] {
            let mut w = Vec::new();
            let mut s = Vec::new();
            let mut u = Vec::new();
            let mut t = Vec::new();
            for conv in &convs {
                let mine: Vec<&&ConversationRow> = conv.iter().filter(|r| r.speaker() == agent).collect();
                for r in &mine {
                    let ws = words(&r.original);
                    w.push(ws.len() as f64);
                    s.push(ws.iter().filter(|x| stop.contains(x.to_lowercase().as_str())).count() as f64);
                }
                u.push(mine.len() as f64);
                t.push(turns(conv) as f64);
            }
            out.push(AgentStats {
                agent,
                gender,
                conversations: convs.len(),
                words_per_utterance: Summary::of(&w),
                stopwords_per_utterance: Summary::of(&s),
                utterances_per_conversation: Summary::of(&u),
                turns_per_conversation: Summary::of(&t),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: u64, ub: u8, original: &str) -> ConversationRow {
        ConversationRow {
            c_num: c,
            ub,
            original: original.into(),
            enhancement: String::new(),
            text: original.into(),
            user_gender: GenderClass::Male,
        }
    }

    #[test]
    fn stopword_list_has_127_entries() {
        assert_eq!(stopwords().len(), 127);
        assert!(stopwords().contains("the") && stopwords().contains("i"));
    }

    #[test]
    fn word_counts() {
        let stats = conversation_stats(&[row(1, 1, "two words"), row(1, 1, "now four words here")]);
        let user = stats.iter().find(|s| s.agent == Speaker::User).unwrap();
        let w = user.words_per_utterance.unwrap();
        assert_eq!((w.avg, w.min, w.max), (3.0, 2.0, 4.0));
        assert_eq!(user.stopwords_per_utterance.unwrap().max, 2.0); // "now", "here"
    }

    #[test]
    fn single_speaker_has_no_turns() {
        let r = [row(1, 1, "a"), row(1, 1, "b")];
        assert_eq!(turns(&r.iter().collect::<Vec<_>>()), 0);
        let r = [row(1, 1, "a"), row(1, 0, "b"), row(1, 1, "c")];
        assert_eq!(turns(&r.iter().collect::<Vec<_>>()), 1);
    }

    #[test]
    fn empty_input_gives_empty_table() {
        assert!(conversation_stats(&[]).is_empty());
    }

    #[test]
    fn punctuation_is_stripped() {
        assert_eq!(words("Hey boy, solve  cross ! "), ["Hey", "boy", "solve", "cross"]);
    }
}
