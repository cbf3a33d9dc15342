//! Molecular ingestion, neighbourhoods and featurisation.

mod batch;
mod edges;
mod featurize;
mod fiber;
mod json;
mod molecule;
mod synthetic;

pub use batch::GraphBatch;
pub use edges::{build_edges, EdgeList, EdgeRule};
pub use featurize::{
    edge_features, featurize, node_features, FeaturizerConfig, MolGraph, ATOMIC_NUMBER_SCALE, DISTANCE_BINS,
    EDGE_FEATURES,
};
pub use fiber::Fiber;
pub use json::{graphs_from_json, graphs_to_json, GraphDoc, NodeDoc, GRAPH_FORMAT_VERSION};
pub use molecule::{atomic_number, parse_xyz, parse_xyz_frames, parse_xyz_with, Alphabet, Atom, Molecule};
pub use synthetic::{pair_decay, random_molecule, synthetic_dataset, SYNTHETIC_TARGET};
