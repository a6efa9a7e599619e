use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::matrix::Matrix;

/// The four optimization groups; each has its own learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Shared,
    Pbd,
    Stae,
    Emotion,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Shared, Group::Pbd, Group::Stae, Group::Emotion];

    pub fn index(self) -> usize {
        match self {
            Group::Shared => 0,
            Group::Pbd => 1,
            Group::Stae => 2,
            Group::Emotion => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Shared => "shared",
            Group::Pbd => "pbd",
            Group::Stae => "stae",
            Group::Emotion => "emotion",
        }
    }

    pub fn from_name(name: &str) -> Option<Group> {
        Group::ALL.into_iter().find(|g| g.name() == name)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub group: Group,
    pub value: Matrix,
}

/// Every trainable tensor of a model, each tagged with exactly one group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub const fn new() -> Self {
        ParamStore { entries: Vec::new() }
    }

    /// Registers a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, group: Group, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(self.find(&name).is_none(), "duplicate parameter name {name}");
        self.entries.push(ParamEntry { name, group, value });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].value
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    /// Ids belonging to one group.
    pub fn group(&self, group: Group) -> Vec<ParamId> {
        self.iter().filter(|(_, e)| e.group == group).map(|(id, _)| id).collect()
    }

    pub fn total_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

/// Gradient buffers, one optional slot per parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    slots: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn new(params: usize) -> Self {
        Gradients { slots: (0..params).map(|_| None).collect() }
    }

    pub fn for_store(store: &ParamStore) -> Self {
        Gradients::new(store.len())
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.slots.get(id.0).and_then(|s| s.as_ref())
    }

    pub fn accumulate(&mut self, id: ParamId, scale: f64, g: &Matrix) {
        match &mut self.slots[id.0] {
            Some(acc) => acc.axpy(scale, g),
            slot @ None => *slot = Some(if scale == 1.0 { g.clone() } else { g.scale(scale) }),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.slots.iter_mut().flatten() {
            g.scale_mut(s);
        }
    }

    pub fn clear(&mut self) {
        for s in &mut self.slots {
            *s = None;
        }
    }

    /// Global L2 norm over all present gradients.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.slots.iter().flatten().map(Matrix::frobenius_sq).sum())
    }
}
