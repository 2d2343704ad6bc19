//! Domain types shared by every other module: the instance, the roster and
//! the completion rules that fill non-work cells.

pub(crate) mod compile;
pub mod document;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::*;

pub(crate) use compile::Compiled;

/// Index of a shift within an instance's shift list.
pub type ShiftIx = u16;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid instance: {}", .0.join("; "))]
    Validation(Vec<String>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompletionError {
    #[error("cell ({nurse}, {day}) has {count} manual requests and no chosen value")]
    Ambiguous { nurse: String, day: i32, count: usize },
    #[error("value `{shift}` is outside the domain of cell ({nurse}, {day})")]
    OutOfDomain { nurse: String, day: i32, shift: String },
    #[error("cell ({nurse}, {day}) is outside the calendar window")]
    OutOfWindow { nurse: String, day: i32 },
    #[error("unknown {what} `{id}`")]
    Unknown { what: &'static str, id: String },
}

/// A validated instance. Deserializing runs the full validation.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "InstanceDocument", into = "InstanceDocument")]
pub struct Instance {
    doc: InstanceDocument,
    pub(crate) c: Compiled,
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("nurses", &self.doc.nurses.len())
            .field("shifts", &self.doc.shifts.len())
            .field("calendar", &self.doc.calendar)
            .finish()
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Eq for Instance {}

impl TryFrom<InstanceDocument> for Instance {
    type Error = ModelError;

    fn try_from(mut doc: InstanceDocument) -> Result<Self, ModelError> {
        doc.canonicalize();
        let c = compile::compile(&doc).map_err(ModelError::Validation)?;
        Ok(Instance { doc, c })
    }
}

impl From<Instance> for InstanceDocument {
    fn from(inst: Instance) -> Self {
        inst.doc
    }
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: InstanceDocument =
            serde_path_to_error::deserialize(de).map_err(|e| ModelError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Instance::try_from(doc)
    }

    /// Canonical pretty-printed JSON; byte-identical for equal instances.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.doc).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn document(&self) -> &InstanceDocument {
        &self.doc
    }

    pub fn calendar(&self) -> &Calendar {
        &self.doc.calendar
    }

    pub fn nurse_count(&self) -> usize {
        self.doc.nurses.len()
    }

    pub fn nurse_id(&self, nurse: usize) -> &str {
        &self.doc.nurses[nurse].id
    }

    pub fn nurse_index(&self, id: &str) -> Option<usize> {
        self.c.nurse_index.get(id).copied()
    }

    pub fn shift_code(&self, shift: ShiftIx) -> &str {
        &self.doc.shifts[shift as usize].code
    }

    pub fn shift_index(&self, code: &str) -> Option<ShiftIx> {
        self.c.shift_index.get(code).copied()
    }

    pub fn shift_class(&self, shift: ShiftIx) -> ShiftClass {
        self.c.classes[shift as usize]
    }

    pub fn first_day(&self) -> i32 {
        self.c.first_day
    }

    pub fn end_day(&self) -> i32 {
        self.c.end_day
    }

    pub fn horizon_days(&self) -> i32 {
        self.c.horizon
    }

    /// Admissible extended shifts for a cell. Past days admit only their
    /// recorded history.
    pub fn cell_domain(&self, nurse: usize, day: i32) -> Option<&[ShiftIx]> {
        if nurse >= self.nurse_count() || !self.calendar().contains(day) {
            return None;
        }
        Some(&self.c.domains[self.c.cell(nurse, day)])
    }

    /// [`Instance::cell_domain`] by string ids, returning shift codes.
    pub fn cell_domain_codes(&self, nurse: &str, day: i32) -> Option<Vec<&str>> {
        let n = self.nurse_index(nurse)?;
        Some(
            self.cell_domain(n, day)?
                .iter()
                .map(|&s| self.shift_code(s))
                .collect(),
        )
    }

    pub fn in_domain(&self, nurse: usize, day: i32, shift: ShiftIx) -> bool {
        self.cell_domain(nurse, day)
            .is_some_and(|d| d.contains(&shift))
    }

    /// The value a cell takes when it carries no work assignment, or `None`
    /// when several manual requests leave the choice open.
    pub fn rest_completion(&self, nurse: usize, day: i32) -> Option<ShiftIx> {
        let idx = self.c.cell(nurse, day);
        if day < 0 {
            return Some(self.c.domains[idx][0]);
        }
        let manual = self.c.manual[idx];
        match manual.count_ones() {
            0 => {
                if self.c.holiday[self.c.offset(day)] {
                    self.c.ph
                } else {
                    self.c.wr
                }
            }
            1 => Some(manual.trailing_zeros() as ShiftIx),
            _ => None,
        }
    }

    /// Fill every cell not given in `core`. Core values must lie in the cell
    /// domain.
    pub fn complete(&self, core: &BTreeMap<(usize, i32), ShiftIx>) -> Result<Roster, CompletionError> {
        let mut roster = Roster::blank(self);
        for (&(n, day), &s) in core {
            if n >= self.nurse_count() || !self.calendar().contains(day) {
                return Err(CompletionError::OutOfWindow {
                    nurse: n.to_string(),
                    day,
                });
            }
            if !self.in_domain(n, day, s) {
                return Err(CompletionError::OutOfDomain {
                    nurse: self.nurse_id(n).to_string(),
                    day,
                    shift: self.shift_code(s).to_string(),
                });
            }
            roster.set(n, day, s);
        }
        for n in 0..self.nurse_count() {
            for day in self.first_day()..self.end_day() {
                if core.contains_key(&(n, day)) {
                    continue;
                }
                match self.rest_completion(n, day) {
                    Some(s) => roster.set(n, day, s),
                    None => {
                        return Err(CompletionError::Ambiguous {
                            nurse: self.nurse_id(n).to_string(),
                            day,
                            count: self.c.manual[self.c.cell(n, day)].count_ones() as usize,
                        })
                    }
                }
            }
        }
        Ok(roster)
    }

    /// Apply request edits and re-validate; the original is left untouched.
    /// A request family the document does not rank yet gets the most
    /// important declared hard priority.
    pub fn with_request_edits(&self, edits: &[RequestEdit]) -> Result<Instance, ModelError> {
        let mut doc = self.doc.clone();
        let top_hard = doc.priorities.iter().filter(|p| p.kind == Kind::Hard).map(|p| p.priority).max().unwrap_or(1);
        for e in edits {
            let family = match e.polarity {
                Polarity::Pos => "pos_request",
                Polarity::Neg => "neg_request",
            };
            if !e.remove && !doc.priorities.iter().any(|p| p.kind == Kind::Hard && p.family == family) {
                doc.priorities.push(PriorityEntry { kind: Kind::Hard, family: family.into(), priority: top_hard });
            }
            let list = match e.polarity {
                Polarity::Pos => &mut doc.pos_requests,
                Polarity::Neg => &mut doc.neg_requests,
            };
            let cell = CellShift::new(&e.nurse, e.day, &e.shift);
            if e.remove {
                list.retain(|c| c != &cell);
            } else {
                list.push(cell);
            }
        }
        Instance::try_from(doc)
    }

    pub(crate) fn compiled(&self) -> &Compiled {
        &self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestEdit {
    pub nurse: String,
    pub day: i32,
    pub shift: String,
    pub polarity: Polarity,
    #[serde(default)]
    pub remove: bool,
}

/// [`Instance::complete`] over string ids.
pub fn complete_roster(core: &[CellShift], instance: &Instance) -> Result<Roster, CompletionError> {
    let mut map = BTreeMap::new();
    for c in core {
        let n = instance
            .nurse_index(&c.nurse)
            .ok_or_else(|| CompletionError::Unknown {
                what: "nurse",
                id: c.nurse.clone(),
            })?;
        let s = instance
            .shift_index(&c.shift)
            .ok_or_else(|| CompletionError::Unknown {
                what: "shift",
                id: c.shift.clone(),
            })?;
        map.insert((n, c.day), s);
    }
    instance.complete(&map)
}

/// Total map (nurse, day) -> shift over the whole calendar window.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Roster {
    nurses: usize,
    first_day: i32,
    len: usize,
    cells: Vec<ShiftIx>,
}

impl Roster {
    fn blank(instance: &Instance) -> Self {
        let len = instance.calendar().window_len();
        Roster {
            nurses: instance.nurse_count(),
            first_day: instance.first_day(),
            len,
            cells: vec![0; len * instance.nurse_count()],
        }
    }

    pub fn nurse_count(&self) -> usize {
        self.nurses
    }

    pub fn first_day(&self) -> i32 {
        self.first_day
    }

    pub fn end_day(&self) -> i32 {
        self.first_day + self.len as i32
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn index(&self, nurse: usize, day: i32) -> usize {
        debug_assert!(day >= self.first_day && day < self.end_day());
        nurse * self.len + (day - self.first_day) as usize
    }

    /// Checked lookup.
    pub fn try_get(&self, nurse: usize, day: i32) -> Option<ShiftIx> {
        if nurse >= self.nurses || day < self.first_day || day >= self.end_day() {
            return None;
        }
        Some(self.cells[self.index(nurse, day)])
    }

    #[inline]
    pub fn get(&self, nurse: usize, day: i32) -> ShiftIx {
        self.cells[self.index(nurse, day)]
    }

    #[inline]
    pub fn set(&mut self, nurse: usize, day: i32, shift: ShiftIx) {
        let i = self.index(nurse, day);
        self.cells[i] = shift;
    }

    pub fn row(&self, nurse: usize) -> &[ShiftIx] {
        &self.cells[nurse * self.len..(nurse + 1) * self.len]
    }

    pub fn cells(&self) -> &[ShiftIx] {
        &self.cells
    }

    /// Decision cells holding a work-class shift.
    pub fn core_cells(&self, instance: &Instance) -> Vec<(usize, i32)> {
        let mut out = Vec::new();
        for n in 0..self.nurses {
            for day in 0..self.end_day() {
                if instance.shift_class(self.get(n, day)) == ShiftClass::Work {
                    out.push((n, day));
                }
            }
        }
        out
    }

    /// The core map that [`Instance::complete`] would turn back into this
    /// roster.
    pub fn core_map(&self, instance: &Instance) -> BTreeMap<(usize, i32), ShiftIx> {
        self.core_cells(instance)
            .into_iter()
            .map(|(n, d)| ((n, d), self.get(n, d)))
            .collect()
    }

    /// Checks shape and that every cell lies in its domain.
    pub fn check(&self, instance: &Instance) -> Result<(), CompletionError> {
        if self.nurses != instance.nurse_count()
            || self.first_day != instance.first_day()
            || self.end_day() != instance.end_day()
        {
            return Err(CompletionError::OutOfWindow {
                nurse: "*".into(),
                day: self.first_day,
            });
        }
        for n in 0..self.nurses {
            for day in self.first_day..self.end_day() {
                let s = self.get(n, day);
                if !instance.in_domain(n, day, s) {
                    return Err(CompletionError::OutOfDomain {
                        nurse: instance.nurse_id(n).to_string(),
                        day,
                        shift: instance.shift_code(s).to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_document(&self, instance: &Instance) -> RosterDocument {
        let mut cells = Vec::with_capacity(self.cells.len());
        for n in 0..self.nurses {
            for day in self.first_day..self.end_day() {
                cells.push(CellShift::new(
                    instance.nurse_id(n),
                    day,
                    instance.shift_code(self.get(n, day)),
                ));
            }
        }
        RosterDocument {
            format_version: FORMAT_VERSION,
            cells,
        }
    }

    /// Builds a roster from a document. Cells absent from the document are
    /// completed; present cells must be in domain.
    pub fn from_document(doc: &RosterDocument, instance: &Instance) -> Result<Roster, CompletionError> {
        let mut map = BTreeMap::new();
        for c in &doc.cells {
            let n = instance
                .nurse_index(&c.nurse)
                .ok_or_else(|| CompletionError::Unknown {
                    what: "nurse",
                    id: c.nurse.clone(),
                })?;
            let s = instance
                .shift_index(&c.shift)
                .ok_or_else(|| CompletionError::Unknown {
                    what: "shift",
                    id: c.shift.clone(),
                })?;
            map.insert((n, c.day), s);
        }
        instance.complete(&map)
    }

    pub fn from_json(text: &str, instance: &Instance) -> Result<Roster, RosterIoError> {
        let doc: RosterDocument = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(RosterIoError::Version(doc.format_version));
        }
        Ok(Roster::from_document(&doc, instance)?)
    }

    pub fn to_json(&self, instance: &Instance) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document(instance)).expect("roster serializes");
        s.push('\n');
        s
    }

    /// Compact one-line-per-nurse rendering for logs and tests.
    pub fn render(&self, instance: &Instance) -> String {
        let mut out = String::new();
        for n in 0..self.nurses {
            out.push_str(instance.nurse_id(n));
            out.push(':');
            for day in self.first_day..self.end_day() {
                out.push(' ');
                out.push_str(instance.shift_code(self.get(n, day)));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum RosterIoError {
    #[error("malformed roster document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported roster format_version {0}")]
    Version(u32),
    #[error(transparent)]
    Completion(#[from] CompletionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterDocument {
    pub format_version: u32,
    pub cells: Vec<CellShift>,
}
