//! SLIC over-segmentation and per-superpixel fire classification.

mod lab;
mod slic;

pub use lab::{rgb_to_lab, srgb_to_lab, LabImage};
pub use slic::{enforce_connectivity, slic, Center, SlicParams, SuperpixelMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage};
use crate::model::ModelGraph;
use crate::pipeline::{fire_decision, Prediction};
use crate::preprocess::Preprocess;
use crate::tensor::Tensor;

pub const FIRE_COLOUR: [u8; 3] = [0, 255, 0];
pub const NO_FIRE_COLOUR: [u8; 3] = [255, 0, 0];

/// Tight bounding-box crop of one region with every non-member pixel set to black.
///
/// Also returns the membership mask of the crop, row-major.
pub fn masked_crop(image: &RgbImage, map: &SuperpixelMap, label: usize) -> Result<(RgbImage, Vec<bool>)> {
    check_map(image, map)?;
    if label >= map.count() {
        return Err(Error::UnknownLabel(label));
    }
    let (x0, y0, x1, y1) = map.bounding_boxes()[label];
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut member = Vec::with_capacity(w * h);
    let crop = RgbImage::from_fn(w, h, |x, y| {
        let inside = map.label(x0 + x, y0 + y) == label;
        member.push(inside);
        if inside {
            image.pixel(x0 + x, y0 + y)
        } else {
            [0, 0, 0]
        }
    });
    Ok((crop, member))
}

/// Network input for one superpixel: masked crop, resized and normalised.
pub fn extract_superpixel_patch(
    image: &RgbImage,
    map: &SuperpixelMap,
    label: usize,
    pre: &Preprocess,
) -> Result<Tensor> {
    let (crop, _) = masked_crop(image, map, label)?;
    pre.apply(&crop)
}

fn check_map(image: &RgbImage, map: &SuperpixelMap) -> Result<()> {
    if (image.width(), image.height()) != (map.width, map.height) {
        return Err(Error::shape(
            "superpixel",
            "image extent",
            format!(
                "image is {}×{}, map is {}×{}",
                image.width(),
                image.height(),
                map.width,
                map.height
            ),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Localization {
    pub map: SuperpixelMap,
    /// One prediction per superpixel label.
    pub predictions: Vec<Prediction>,
    /// 255 where the pixel's superpixel is fire, else 0.
    pub mask: GrayImage,
    /// Source image with region boundaries drawn green (fire) or red (no fire).
    pub overlay: RgbImage,
}

impl Localization {
    pub fn fire_count(&self) -> usize {
        self.predictions.iter().filter(|p| p.fire).count()
    }
}

pub fn localize_fire(model: &ModelGraph, image: &RgbImage, p: &SlicParams, threshold: f64) -> Result<Localization> {
    let map = slic(&rgb_to_lab(image), p)?;
    localize_with_map(model, image, map, threshold)
}

/// Classifies every region of an existing segmentation.
pub fn localize_with_map(
    model: &ModelGraph,
    image: &RgbImage,
    map: SuperpixelMap,
    threshold: f64,
) -> Result<Localization> {
    check_map(image, &map)?;
    let pre = Preprocess {
        size: model.input_size(),
        ..Preprocess::default()
    };
    let predictions = (0..map.count())
        .into_par_iter()
        .map(|label| {
            let patch = extract_superpixel_patch(image, &map, label, &pre)?;
            let logit = model.forward(&patch)?[0];
            Ok(fire_decision(logit, threshold))
        })
        .collect::<Result<Vec<_>>>()?;

    let mask = GrayImage {
        width: map.width,
        height: map.height,
        data: map
            .labels
            .iter()
            .map(|&l| if predictions[l].fire { 255 } else { 0 })
            .collect(),
    };
    let mut overlay = image.clone();
    for y in 0..map.height {
        for x in 0..map.width {
            if map.is_boundary(x, y) {
                let colour = if predictions[map.label(x, y)].fire {
                    FIRE_COLOUR
                } else {
                    NO_FIRE_COLOUR
                };
                overlay.set_pixel(x, y, colour);
            }
        }
    }
    Ok(Localization {
        map,
        predictions,
        mask,
        overlay,
    })
}
