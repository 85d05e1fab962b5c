//! Computable models of metric spaces with geodesic bicombings, and numerical
//! checks of the constructions that live on them: barycenters, translation
//! lengths, axes, flat strips and half-planes, four-point hyperbolicity and
//! the flat-torus averaging scheme.

pub mod assignment;
pub mod axioms;
pub mod axis;
pub mod barycenter;
pub mod cli;
pub mod error;
pub mod flats;
pub mod hyperbolicity;
pub mod isometry;
pub mod metric;
pub mod report;
pub mod spaces;
pub mod toruslab;

pub use error::{LabError, Result};
pub use metric::{Bicombing, GeodesicTrack, Interval, MetricSpace, SamplerDomain, ToleranceConfig};
pub use report::{ExperimentReport, Violation};
