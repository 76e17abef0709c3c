//! The fixed category taxonomy used for zero-shot entity recognition.
//!
//! Categories are serialized by display name, and their declaration order is
//! the tie-break order whenever a majority vote between categories is even.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! categories {
    ($($variant:ident => $name:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum CategoryType {
            $($variant,)*
        }

        impl CategoryType {
            pub const ALL: &'static [CategoryType] = &[$(CategoryType::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(CategoryType::$variant => $name,)*
                }
            }
        }
    };
}

categories! {
    Concept => "Concept",
    NuclearFusionExperimentalFacility => "Nuclear Fusion Experimental Facility",
    NuclearFusionTechnique => "Nuclear Fusion Technique",
    NuclearFusionDeviceType => "Nuclear Fusion Device Type",
    NuclearFusionSystemComponent => "Nuclear Fusion System Component",
    NuclearFusionSystemConfiguration => "Nuclear Fusion System Configuration",
    ExperimentalApparatus => "Experimental Apparatus",
    PhysicalProcess => "Physical Process",
    PhysicsEntity => "Physics Entity",
    FieldConfiguration => "Field Configuration",
    Particle => "Particle",
    ChemicalElementOrCompound => "Chemical Element or Compound",
    PlasmaProperty => "Plasma Property",
    PlasmaEvent => "Plasma Event",
    PlasmaRegion => "Plasma Region",
    PlasmaDynamicsAndBehavior => "Plasma Dynamics and Behavior",
    DetectionAndMonitoringSystems => "Detection and Monitoring Systems",
    ControlSystems => "Control Systems",
    TheoryAndCalculation => "Theory and Calculation",
    SoftwareAndSimulation => "Software and Simulation",
    TimeReference => "Time Reference",
    CountryAndLocation => "Country and Location",
    FacilityOrInstitution => "Facility or Institution",
    Person => "Person",
    SafetyFeatureAndRegulatoryStandard => "Safety Feature and Regulatory Standard",
    Database => "Database",
    ScientificPublicationAndCitation => "Scientific Publication and Citation",
    ResearchField => "Research Field",
}

impl CategoryType {
    /// Position in the taxonomy; lower wins ties.
    pub fn rank(self) -> usize {
        self as usize
    }

    /// Case-insensitive, whitespace-tolerant lookup by display name.
    pub fn from_name(name: &str) -> Option<Self> {
        let wanted = collapse(name);
        Self::ALL
            .iter()
            .copied()
            .find(|c| collapse(c.name()) == wanted)
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for CategoryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCategory(pub String);

impl fmt::Display for UnknownCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown category type `{}`", self.0)
    }
}

impl std::error::Error for UnknownCategory {}

impl FromStr for CategoryType {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s).ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl Serialize for CategoryType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for CategoryType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
