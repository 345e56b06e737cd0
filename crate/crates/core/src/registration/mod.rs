//! Template-to-image registration.
//!
//! Both images are reduced to DoG keypoints with gradient-histogram
//! descriptors, matched by mutual nearest neighbour, and related by a
//! RANSAC homography. The homography then carries template field quads
//! into the test image, where [`warp_extract`] rectifies them.

mod descriptor;
mod homography;
mod keypoints;
mod matching;
mod warp;

pub use descriptor::{compute_descriptors, Descriptor, DescriptorSet, DESCRIPTOR_LEN};
pub use homography::{dlt, estimate_homography, project_points, Homography, HomographyEstimate, RansacParams};
pub use keypoints::{detect_keypoints, detect_keypoints_with, DogParams, Keypoint};
pub use matching::{match_bruteforce, Match};
pub use warp::{quad_extent, warp_extract, warp_with};

use crate::error::Result;
use crate::geometry::Point;
use crate::imaging::{to_grayscale, RasterImage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationParams {
    pub dog: DogParams,
    pub ransac: RansacParams,
    /// Strongest keypoints kept per image (0 keeps all).
    pub max_keypoints: usize,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            dog: DogParams::default(),
            ransac: RansacParams::default(),
            max_keypoints: 1500,
        }
    }
}

/// Keypoints of one image with their descriptors.
#[derive(Debug, Clone)]
pub struct Features {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: DescriptorSet,
}

impl Features {
    /// Location of the keypoint behind descriptor `i`.
    pub fn point(&self, i: usize) -> Point {
        let k = &self.keypoints[self.descriptors.keypoint_index[i]];
        Point::new(k.x, k.y)
    }
}

/// Detects keypoints and describes them from a single scale space.
pub fn extract_features(img: &RasterImage, params: &RegistrationParams) -> Features {
    let gray = to_grayscale(img);
    if gray.width() < 32 || gray.height() < 32 {
        return Features {
            keypoints: Vec::new(),
            descriptors: DescriptorSet::default(),
        };
    }
    let Some(space) = keypoints::ScaleSpace::build(&gray, params.dog) else {
        return Features {
            keypoints: Vec::new(),
            descriptors: DescriptorSet::default(),
        };
    };
    let mut kps = keypoints::detect_in(&space);
    if params.max_keypoints > 0 && kps.len() > params.max_keypoints {
        let mut order: Vec<usize> = (0..kps.len()).collect();
        order.sort_by(|&a, &b| kps[b].response.total_cmp(&kps[a].response).then(a.cmp(&b)));
        let mut keep = vec![false; kps.len()];
        for &i in &order[..params.max_keypoints] {
            keep[i] = true;
        }
        let mut i = 0;
        kps.retain(|_| {
            i += 1;
            keep[i - 1]
        });
    }
    let descriptors = descriptor::describe_in(&space, &kps);
    Features {
        keypoints: kps,
        descriptors,
    }
}

#[derive(Debug, Clone)]
pub struct Registration {
    /// Maps template coordinates to test-image coordinates.
    pub homography: Homography,
    pub matches: usize,
    pub inliers: usize,
}

/// Estimates the template-to-test homography.
pub fn register(template: &RasterImage, test: &RasterImage, params: &RegistrationParams) -> Result<Registration> {
    let a = extract_features(template, params);
    let b = extract_features(test, params);
    let matches = match_bruteforce(&a.descriptors.descriptors, &b.descriptors.descriptors, true);
    let pairs: Vec<(Point, Point)> = matches.iter().map(|m| (a.point(m.index_a), b.point(m.index_b))).collect();
    let est = estimate_homography(&pairs, &params.ransac)?;
    Ok(Registration {
        homography: est.homography,
        matches: matches.len(),
        inliers: est.inlier_count(),
    })
}
