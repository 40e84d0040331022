use std::collections::HashMap;

/// A bidirectional map between surface strings and dense ids `0..len`.
///
/// Ids are handed out in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Symbols {
    ids: HashMap<String, usize>,
    names: Vec<String>,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(name.to_owned(), id);
        self.names.push(name.to_owned());
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub entities: Symbols,
    pub relations: Symbols,
    pub data_relations: Symbols,
}
