//! Adaptive dynamics: vector fields, integration, invariants and experiments.

pub mod closed_form;
pub mod conserved;
pub mod experiments;
pub mod field;
pub mod integrate;

pub use closed_form::{
    counting_antisym_closed, memory1_antisym_field_closed, memory1_field_closed, reactive_fields, ReactiveFields,
};
pub use conserved::{
    conserved_pair_difference, conserved_quantities_memory1, valid_suffixes, ConservedQuantity, ConservedReport,
};
pub use experiments::{perturbation_experiment, phi, tft_stationarity, z2_mirror_check};
pub use field::{
    adaptive_field, counting_field, ClosedForm, CountingField, CountingVariant, FieldSpec, FieldVariant,
    GradientMethod, Negated, VectorField,
};
pub use integrate::{integrate, IntegrateOptions, Method, StopReason, Trajectory};
