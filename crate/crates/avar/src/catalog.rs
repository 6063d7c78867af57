//! Shipped operators with their known classification.

use avar_core::operator::{
    cauchy_riemann, divergence, gradient, partial_x_only, symmetric_gradient,
};
use avar_core::Operator;
use serde::Serialize;

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Immediate from the definitions.
    Definition,
    /// A closed-form computation by hand.
    ClosedForm,
    /// An independent numerical oracle.
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Known<T> {
    pub value: T,
    pub source: Source,
}

fn known<T>(value: T, source: Source) -> Known<T> {
    Known { value, source }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownConstant {
    pub description: &'static str,
    pub value: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expected {
    pub real_elliptic: Known<bool>,
    pub complex_elliptic: Known<bool>,
    /// `None` when the kernel is infinite-dimensional.
    pub kernel_dimension: Option<Known<usize>>,
    /// `None` when the cancelling check does not apply (not real-elliptic).
    pub cancelling: Option<Known<bool>>,
    pub constants: Vec<KnownConstant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub operator: Operator,
    pub expected: Expected,
}

pub const NAMES: [&str; 7] = [
    "gradient1d",
    "gradient2d",
    "symgrad2d",
    "symgrad3d",
    "cauchy_riemann",
    "dx_only",
    "divergence2d",
];

pub fn lookup(name: &str) -> Option<CatalogEntry> {
    use Source::*;
    let pi = std::f64::consts::PI;
    let elliptic = |kernel: usize, cancelling: bool, constants: Vec<KnownConstant>| Expected {
        real_elliptic: known(true, ClosedForm),
        complex_elliptic: known(true, ClosedForm),
        kernel_dimension: Some(known(kernel, Computed)),
        cancelling: Some(known(cancelling, ClosedForm)),
        constants,
    };
    let (operator, expected) = match name {
        "gradient1d" => (
            gradient(1, 1),
            Expected {
                cancelling: Some(known(false, Definition)),
                ..elliptic(
                    1,
                    false,
                    vec![
                        KnownConstant {
                            description: "p=2 subset constant, E = Omega = (0,1)",
                            value: 1.0 / pi,
                            source: ClosedForm,
                        },
                        KnownConstant {
                            description: "p=2 trace constant, Gamma = {0} on (0,1)",
                            value: 2.0 / pi,
                            source: ClosedForm,
                        },
                    ],
                )
            },
        ),
        "gradient2d" => (
            gradient(2, 1),
            elliptic(
                1,
                true,
                vec![KnownConstant {
                    description: "p=2 subset constant, E = Omega = unit square",
                    value: 1.0 / pi,
                    source: ClosedForm,
                }],
            ),
        ),
        "symgrad2d" => (symmetric_gradient(2), elliptic(3, true, Vec::new())),
        "symgrad3d" => (symmetric_gradient(3), elliptic(6, true, Vec::new())),
        "cauchy_riemann" => (
            cauchy_riemann(),
            Expected {
                real_elliptic: known(true, ClosedForm),
                complex_elliptic: known(false, Computed),
                kernel_dimension: None,
                cancelling: Some(known(false, ClosedForm)),
                constants: Vec::new(),
            },
        ),
        "dx_only" => (
            partial_x_only(),
            Expected {
                real_elliptic: known(false, Definition),
                complex_elliptic: known(false, Definition),
                kernel_dimension: None,
                cancelling: None,
                constants: Vec::new(),
            },
        ),
        "divergence2d" => (
            divergence(2),
            Expected {
                real_elliptic: known(false, ClosedForm),
                complex_elliptic: known(false, ClosedForm),
                kernel_dimension: None,
                cancelling: None,
                constants: Vec::new(),
            },
        ),
        _ => return None,
    };
    let name = NAMES.iter().copied().find(|n| *n == name)?;
    Some(CatalogEntry {
        name,
        operator,
        expected,
    })
}

pub fn entries() -> Vec<CatalogEntry> {
    NAMES
        .iter()
        .map(|n| lookup(n).expect("catalog name"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_match_operator_labels() {
        for e in entries() {
            assert_eq!(e.operator.label(), e.name);
        }
        assert!(lookup("nope").is_none());
    }
}
