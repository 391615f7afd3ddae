//! Stitch geo-referenced mosaic tiles into whole-object vector polygons.
//!
//! The pipeline selects tiles with a range query ([`catalog`]), checks that
//! they cover the query ([`coverage`]), turns each raster into boundary
//! fragments ([`vectorizer`]), and stitches fragments across tiles
//! ([`stitcher`]) inside a small deterministic map-reduce executor
//! ([`mapreduce`]). [`pipeline`] runs those steps end to end and [`synth`]
//! builds scenes with known ground truth.

pub mod catalog;
pub mod coverage;
pub mod geo;
pub mod planar;
pub mod tilefile;
pub mod vectorizer;
pub mod stitcher;
pub mod mapreduce;
pub mod format;
pub mod synth;
pub mod pipeline;
