//! COCO object-detection JSON, extended with per-image `frame_index` and
//! `video_id` keys. Emission is byte-deterministic: fixed key order, shortest
//! round-trip float formatting.

use serde::{Deserialize, Serialize};

use super::{AnnotationSet, BBox, BoxEntry, ImageEntry};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CocoDoc {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
    frame_index: u64,
    video_id: String,
}

#[derive(Serialize, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u32,
    bbox: [f64; 4],
    area: f64,
    iscrowd: u8,
}

#[derive(Serialize, Deserialize)]
struct CocoCategory {
    id: u32,
    name: String,
}

/// Serializes an annotation set as COCO JSON. Identical input produces
/// identical bytes.
pub fn emit_coco(annotations: &AnnotationSet) -> String {
    let doc = CocoDoc {
        images: annotations
            .images()
            .iter()
            .map(|img| CocoImage {
                id: img.id,
                file_name: img.file_name.clone(),
                width: img.width,
                height: img.height,
                frame_index: img.frame_index,
                video_id: img.video_id.clone(),
            })
            .collect(),
        annotations: annotations
            .boxes()
            .iter()
            .map(|b| CocoAnnotation {
                id: b.id,
                image_id: b.image_id,
                category_id: b.class_id,
                bbox: [b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h],
                area: b.bbox.area(),
                iscrowd: 0,
            })
            .collect(),
        categories: vec![CocoCategory {
            id: 1,
            name: "apex".into(),
        }],
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("COCO document serializes");
    json.push('\n');
    json
}

/// Parses COCO JSON produced by [`emit_coco`] (or an equivalent exporter)
/// back into a validated annotation set.
pub fn parse_coco(json: &str) -> Result<AnnotationSet> {
    let doc: CocoDoc = serde_json::from_str(json).map_err(|e| Error::CocoSchema {
        message: e.to_string(),
    })?;
    let images = doc
        .images
        .into_iter()
        .map(|img| ImageEntry {
            id: img.id,
            file_name: img.file_name,
            width: img.width,
            height: img.height,
            frame_index: img.frame_index,
            video_id: img.video_id,
        })
        .collect();
    let boxes = doc
        .annotations
        .into_iter()
        .map(|a| BoxEntry {
            id: a.id,
            image_id: a.image_id,
            class_id: a.category_id,
            bbox: BBox {
                x: a.bbox[0],
                y: a.bbox[1],
                w: a.bbox[2],
                h: a.bbox[3],
            },
        })
        .collect();
    AnnotationSet::new(images, boxes)
}
