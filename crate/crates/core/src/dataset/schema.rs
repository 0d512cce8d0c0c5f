use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One bias attribute and its ordered category labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub domain: Vec<String>,
}

impl AttributeDef {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.domain.iter().position(|l| l == label)
    }
}

/// Ordered list of attributes recorded for every subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeSchema {
    attributes: Vec<AttributeDef>,
}

pub const YOB_DECADES: [&str; 7] = [
    "1920s", "1930s", "1940s", "1950s", "1960s", "1970s", "1980s",
];
pub const GENDERS: [&str; 2] = ["Male", "Female"];
pub const ETHNICITIES: [&str; 7] = [
    "Asian",
    "Black-or-African-American",
    "Hispanic",
    "Native-American",
    "Other",
    "Pacific-Islander",
    "White",
];
pub const BOOLEANS: [&str; 2] = ["True", "False"];

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("schema has no attributes".into()));
        }
        let mut names = BTreeSet::new();
        for attr in &attributes {
            if attr.name.is_empty() || attr.name == "subject_id" {
                return Err(Error::Schema(format!(
                    "invalid attribute name `{}`",
                    attr.name
                )));
            }
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute `{}`",
                    attr.name
                )));
            }
            let labels: BTreeSet<&str> = attr.domain.iter().map(String::as_str).collect();
            if labels.len() != attr.domain.len() {
                return Err(Error::Schema(format!(
                    "attribute `{}` has duplicate labels",
                    attr.name
                )));
            }
            if labels.len() < 2 {
                return Err(Error::Schema(format!(
                    "attribute `{}` needs at least two labels",
                    attr.name
                )));
            }
            if attr.domain.iter().any(|l| l.is_empty()) {
                return Err(Error::Schema(format!(
                    "attribute `{}` has an empty label",
                    attr.name
                )));
            }
        }
        Ok(Self { attributes })
    }

    /// Year-of-birth decade, gender, ethnicity, glasses, beard and mustache.
    pub fn default_schema() -> Self {
        let def = |name: &str, labels: &[&str]| AttributeDef {
            name: name.to_string(),
            domain: labels.iter().map(|s| s.to_string()).collect(),
        };
        Self {
            attributes: vec![
                def("yob_decade", &YOB_DECADES),
                def("gender", &GENDERS),
                def("ethnicity", &ETHNICITIES),
                def("glasses", &BOOLEANS),
                def("beard", &BOOLEANS),
                def("mustache", &BOOLEANS),
            ],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            attributes: Vec<AttributeDef>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::new(raw.attributes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Resolves `(attribute, label)` to positional indices.
    pub fn resolve(&self, name: &str, label: &str) -> Result<(usize, usize)> {
        let a = self
            .index_of(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))?;
        let v = self.attributes[a]
            .index_of(label)
            .ok_or_else(|| Error::UnknownValue {
                attribute: name.to_string(),
                label: label.to_string(),
            })?;
        Ok((a, v))
    }
}

impl Default for AttributeSchema {
    fn default() -> Self {
        Self::default_schema()
    }
}

impl<'de> Deserialize<'de> for AttributeSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            attributes: Vec<AttributeDef>,
        }
        let raw = Raw::deserialize(d)?;
        Self::new(raw.attributes).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_shape() {
        let s = AttributeSchema::default_schema();
        let sizes: Vec<usize> = s.attributes().iter().map(|a| a.domain.len()).collect();
        assert_eq!(sizes, vec![7, 2, 7, 2, 2, 2]);
        assert_eq!(s.resolve("gender", "Female").unwrap(), (1, 1));
    }

    #[test]
    fn json_round_trip() {
        let s = AttributeSchema::default_schema();
        assert_eq!(AttributeSchema::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn rejects_degenerate_domains() {
        let one = r#"{"attributes":[{"name":"g","domain":["x"]}]}"#;
        assert!(AttributeSchema::from_json(one).is_err());
        let dup =
            r#"{"attributes":[{"name":"g","domain":["x","y"]},{"name":"g","domain":["x","y"]}]}"#;
        assert!(AttributeSchema::from_json(dup).is_err());
        let repeated = r#"{"attributes":[{"name":"g","domain":["x","x"]}]}"#;
        assert!(AttributeSchema::from_json(repeated).is_err());
    }
}
