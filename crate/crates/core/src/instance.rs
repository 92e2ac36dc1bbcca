//! The JSON instance file: anchors, potential and optional solver settings.

use std::fmt;
use std::path::Path;

use serde::de::{self, DeserializeSeed, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Serialize;

use crate::critical_set::TestingPlan;
use crate::error::{Result, SteinerError};
use crate::flow::FlowConfig;
use crate::objective::Objective;
use crate::point::AnchorSet;
use crate::potentials::PotentialSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceFile {
    pub dimension: usize,
    pub anchors: Vec<Vec<f64>>,
    pub potential: PotentialSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub testing_plan: Option<TestingPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
}

impl InstanceFile {
    /// Parses and validates. Anchor rows of the wrong length are reported
    /// with the anchor index and the line they end on.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Header {
            dimension: Option<usize>,
        }
        let dimension = serde_json::from_str::<Header>(text)
            .map_err(|e| SteinerError::InvalidInput(format!("malformed instance: {e}")))?
            .dimension
            .ok_or_else(|| SteinerError::config("dimension", "missing"))?;
        if dimension == 0 {
            return Err(SteinerError::config("dimension", "must be at least 1"));
        }

        let mut de = serde_json::Deserializer::from_str(text);
        let instance = InstanceSeed { dimension }
            .deserialize(&mut de)
            .and_then(|v| de.end().map(|_| v))
            .map_err(|e| SteinerError::InvalidInput(format!("malformed instance: {e}")))?;
        instance.validate()?;
        Ok(instance)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SteinerError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        crate::fmt::to_json_pretty(self).expect("instance serializes")
    }

    /// Semantic checks that do not depend on file positions.
    pub fn validate(&self) -> Result<()> {
        self.objective()?;
        if let Some(flow) = &self.flow {
            flow.validate()?;
        }
        if let Some(plan) = &self.testing_plan {
            if plan.count == 0 {
                return Err(SteinerError::config("testing_plan.count", "must be at least 1"));
            }
            plan.resolve_box(&self.anchor_set()?)?;
        }
        Ok(())
    }

    pub fn anchor_set(&self) -> Result<AnchorSet> {
        AnchorSet::from_rows(self.anchors.clone())
    }

    pub fn objective(&self) -> Result<Objective> {
        Objective::new(self.anchor_set()?, &self.potential)
    }
}

struct InstanceSeed {
    dimension: usize,
}

impl<'de> DeserializeSeed<'de> for InstanceSeed {
    type Value = InstanceFile;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> std::result::Result<InstanceFile, D::Error> {
        deserializer.deserialize_map(self)
    }
}

const FIELDS: &[&str] = &["dimension", "anchors", "potential", "testing_plan", "flow"];

impl<'de> Visitor<'de> for InstanceSeed {
    type Value = InstanceFile;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an instance object")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<InstanceFile, A::Error> {
        let mut anchors = None;
        let mut potential = None;
        let mut testing_plan = None;
        let mut flow = None;
        let mut seen_dimension = false;
        while let Some(key) = map.next_key::<String>()? {
            let duplicate = match key.as_str() {
                "dimension" => std::mem::replace(&mut seen_dimension, {
                    map.next_value::<usize>()?;
                    true
                }),
                "anchors" => anchors
                    .replace(map.next_value_seed(AnchorRows {
                        dimension: self.dimension,
                    })?)
                    .is_some(),
                "potential" => potential.replace(map.next_value::<PotentialSpec>()?).is_some(),
                "testing_plan" => testing_plan.replace(map.next_value::<TestingPlan>()?).is_some(),
                "flow" => flow.replace(map.next_value::<FlowConfig>()?).is_some(),
                other => return Err(de::Error::unknown_field(other, FIELDS)),
            };
            if duplicate {
                return Err(de::Error::custom(format!("duplicate field `{key}`")));
            }
        }
        Ok(InstanceFile {
            dimension: self.dimension,
            anchors: anchors.ok_or_else(|| de::Error::missing_field("anchors"))?,
            potential: potential.ok_or_else(|| de::Error::missing_field("potential"))?,
            testing_plan,
            flow,
        })
    }
}

struct AnchorRows {
    dimension: usize,
}

impl<'de> DeserializeSeed<'de> for AnchorRows {
    type Value = Vec<Vec<f64>>;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> std::result::Result<Self::Value, D::Error> {
        deserializer.deserialize_seq(self)
    }
}

impl<'de> Visitor<'de> for AnchorRows {
    type Value = Vec<Vec<f64>>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a list of anchors with {} coordinates each", self.dimension)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
        let mut rows = Vec::new();
        while let Some(row) = seq.next_element_seed(AnchorRow {
            index: rows.len(),
            dimension: self.dimension,
        })? {
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(de::Error::custom("anchors must not be empty"));
        }
        Ok(rows)
    }
}

/// One anchor row. The length check happens while the row is being read, so
/// the parser's position (and hence the reported line) is still on that row.
struct AnchorRow {
    index: usize,
    dimension: usize,
}

impl<'de> DeserializeSeed<'de> for AnchorRow {
    type Value = Vec<f64>;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> std::result::Result<Self::Value, D::Error> {
        deserializer.deserialize_seq(self)
    }
}

impl<'de> Visitor<'de> for AnchorRow {
    type Value = Vec<f64>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "anchor {} as a list of {} numbers", self.index, self.dimension)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
        let mut row = Vec::with_capacity(self.dimension);
        while let Some(c) = seq.next_element::<f64>()? {
            row.push(c);
        }
        if row.len() != self.dimension {
            return Err(de::Error::custom(format!(
                "anchor {} has {} coordinates, expected {}",
                self.index,
                row.len(),
                self.dimension
            )));
        }
        Ok(row)
    }
}
