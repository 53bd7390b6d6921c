//! Name-keyed registry of interchangeable strategies.
//!
//! Entries keep their registration order, which is also the iteration order.

use crate::error::{LabError, Result};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(String, Box<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds an entry, replacing any previous entry with the same name.
    pub fn register(&mut self, name: impl Into<String>, entry: Box<T>) -> &mut Self {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = entry,
            None => self.entries.push((name, entry)),
        }
        self
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, e)| e.as_ref())
            .ok_or_else(|| LabError::UnknownName {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n.eq_ignore_ascii_case(name))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &T)> {
        self.entries.iter().map(|(n, e)| (n.as_str(), e.as_ref()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: ?Sized> std::fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }
    struct Plain(&'static str);
    impl Greeter for Plain {
        fn greet(&self) -> String {
            self.0.to_string()
        }
    }

    #[test]
    fn lookup_is_case_insensitive_and_ordered() {
        let mut reg: Registry<dyn Greeter> = Registry::new("greeter");
        reg.register("b", Box::new(Plain("bee")))
            .register("a", Box::new(Plain("ay")));
        assert_eq!(reg.names(), vec!["b", "a"]);
        assert_eq!(reg.get("B").unwrap().greet(), "bee");
        reg.register("b", Box::new(Plain("bee2")));
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.get("b").unwrap().greet(), "bee2");
    }

    #[test]
    fn unknown_name_lists_known_entries() {
        let mut reg: Registry<dyn Greeter> = Registry::new("greeter");
        reg.register("only", Box::new(Plain("x")));
        let err = reg.get("missing").err().unwrap();
        assert!(err.to_string().contains("only"));
    }
}
