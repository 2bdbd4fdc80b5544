//! Patch sampling with dihedral augmentation, reflection padding, tiled
//! prediction with exact-cover stitching, and boundary-loss profiling.

mod dih4;
mod geometry;
mod pad;
mod profile;
mod sample;
mod tile;

pub use dih4::Dih4;
pub use geometry::{PatchGeometry, PlanarImage};
pub use pad::{reflect_index, reflect_pad, reflect_pad_1d, reflect_pad_plane};
pub use profile::{boundary_profile, chebyshev_bin, spearman, BoundaryProfile, ProfileBin};
pub use sample::{sample_patches, PatchBatch, PatchOrigin, PatchSampler};
pub use tile::{
    predict_tiled, seam_report, stitch, tile_plan, ConstantModel, IdentityModel, PatchPredictor, SeamReport, Tile,
    Uncropped,
};
