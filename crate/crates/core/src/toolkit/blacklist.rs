use serde::{Deserialize, Serialize};

/// Name patterns excluded from introspection output.
///
/// An entry is either an exact name or a prefix glob ending in a single
/// trailing `*`. Matching is case-sensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Blacklist {
    entries: Vec<String>,
}

impl Blacklist {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list = Self::default();
        for e in entries {
            list.push(e.into());
        }
        list
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, entry: String) {
        if !self.entries.contains(&entry) {
            self.entries.push(entry);
        }
    }

    pub fn matches(&self, name: &str) -> bool {
        self.entries.iter().any(|e| match e.strip_suffix('*') {
            Some(prefix) => name.starts_with(prefix),
            None => e == name,
        })
    }

    /// `self` followed by the entries of `other` not already present.
    pub fn union(&self, other: &Blacklist) -> Blacklist {
        let mut out = self.clone();
        for e in &other.entries {
            out.push(e.clone());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_matches_nothing() {
        let b = Blacklist::default();
        assert!(!b.matches("/talker"));
        assert!(!b.matches(""));
    }

    #[test]
    fn exact_and_prefix_glob() {
        let b = Blacklist::new(["/rosout", "/diag*"]);
        assert!(b.matches("/rosout"));
        assert!(!b.matches("/rosout_agg"));
        assert!(b.matches("/diag_a"));
        assert!(b.matches("/diag"));
        assert!(!b.matches("/Diag_a"));
        assert!(!b.matches("/talker"));
    }

    #[test]
    fn union_keeps_order_and_drops_duplicates() {
        let g = Blacklist::new(["/rosout", "/a"]);
        let a = Blacklist::new(["/talker", "/a"]);
        assert_eq!(g.union(&a).entries(), ["/rosout", "/a", "/talker"]);
    }
}
