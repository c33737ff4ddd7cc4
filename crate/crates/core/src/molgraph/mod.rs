//! Atom records to featurized molecular graphs, plus pocket cropping.

pub mod elements;
pub mod features;
pub mod graph;
pub mod pocket;

pub use features::{featurize, FeatureSchema, Neighborhood, FEATURE_DIM};
pub use graph::{build_graph, radius_edges, Atom, ChainTag, DirectedEdges, MolecularGraph};
pub use pocket::{contact_atoms, crop_pocket, Pocket};
