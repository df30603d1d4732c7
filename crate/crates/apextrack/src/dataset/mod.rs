//! Annotation handling: Pascal VOC ingestion, COCO JSON emission, ground
//! truth track extraction and the on-disk tensor file format.

mod atrk;
mod coco;
mod voc;

pub use atrk::{read_tensor_file, write_tensor_file, TensorData, TensorKind, ATRK_MAGIC, ATRK_VERSION};
pub use coco::{emit_coco, parse_coco};
pub use voc::{parse_voc, render_voc};

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Axis-aligned box in 0-based image pixels: top-left corner plus size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// One annotated image (a video frame).
#[derive(Clone, Debug, PartialEq)]
pub struct ImageEntry {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub frame_index: u64,
    pub video_id: String,
}

/// One labeled bounding box referencing an image.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxEntry {
    pub id: u64,
    pub image_id: u64,
    /// COCO category id; 1 is the apex class.
    pub class_id: u32,
    pub bbox: BBox,
}

/// A validated collection of images and their boxes.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AnnotationSet {
    images: Vec<ImageEntry>,
    boxes: Vec<BoxEntry>,
}

impl AnnotationSet {
    pub fn new(images: Vec<ImageEntry>, boxes: Vec<BoxEntry>) -> Result<Self> {
        let mut image_ids = HashSet::new();
        for img in &images {
            if !image_ids.insert(img.id) {
                return Err(Error::AnnotationInvariant(format!(
                    "duplicate image id {}",
                    img.id
                )));
            }
            if img.width == 0 || img.height == 0 {
                return Err(Error::AnnotationInvariant(format!(
                    "image {} has zero size",
                    img.id
                )));
            }
        }
        let dims: HashMap<u64, (u32, u32)> = images
            .iter()
            .map(|i| (i.id, (i.width, i.height)))
            .collect();
        let mut box_ids = HashSet::new();
        for b in &boxes {
            if !box_ids.insert(b.id) {
                return Err(Error::AnnotationInvariant(format!(
                    "duplicate annotation id {}",
                    b.id
                )));
            }
            let Some(&(w, h)) = dims.get(&b.image_id) else {
                return Err(Error::AnnotationInvariant(format!(
                    "annotation {} references missing image {}",
                    b.id, b.image_id
                )));
            };
            let bb = b.bbox;
            if !(bb.x.is_finite() && bb.y.is_finite() && bb.w.is_finite() && bb.h.is_finite()) {
                return Err(Error::AnnotationInvariant(format!(
                    "annotation {} has non-finite bbox",
                    b.id
                )));
            }
            if bb.w < 0.0 || bb.h < 0.0 {
                return Err(Error::AnnotationInvariant(format!(
                    "annotation {} has negative bbox size",
                    b.id
                )));
            }
            if bb.x < 0.0 || bb.y < 0.0 || bb.x + bb.w > f64::from(w) || bb.y + bb.h > f64::from(h)
            {
                return Err(Error::AnnotationInvariant(format!(
                    "annotation {} bbox outside {}x{} image bounds",
                    b.id, w, h
                )));
            }
        }
        Ok(Self { images, boxes })
    }

    pub fn images(&self) -> &[ImageEntry] {
        &self.images
    }

    pub fn boxes(&self) -> &[BoxEntry] {
        &self.boxes
    }
}

/// One annotated frame of a ground-truth track.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtPoint {
    pub frame: u64,
    pub center: (f64, f64),
    pub size: (f64, f64),
}

/// Per-video ground truth: bbox centers ordered by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthTrack {
    video_id: String,
    points: Vec<GtPoint>,
}

impl GroundTruthTrack {
    pub fn new(video_id: impl Into<String>, points: Vec<GtPoint>) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(Error::InvalidTrack(format!(
                    "frame indices not strictly increasing at frame {}",
                    w[1].frame
                )));
            }
        }
        for p in &points {
            if !(p.center.0.is_finite() && p.center.1.is_finite()) {
                return Err(Error::InvalidTrack(format!(
                    "non-finite center at frame {}",
                    p.frame
                )));
            }
            if p.size.0 < 0.0 || p.size.1 < 0.0 {
                return Err(Error::InvalidTrack(format!(
                    "negative size at frame {}",
                    p.frame
                )));
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            points,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn points(&self) -> &[GtPoint] {
        &self.points
    }

    /// Highest annotated frame index, if any.
    pub fn max_frame(&self) -> Option<u64> {
        self.points.last().map(|p| p.frame)
    }
}

/// Splits an annotation set into per-video ground-truth tracks of bbox
/// centers. Images without a box are simply absent from the track; a frame
/// with two or more boxes is ambiguous for single-apex ground truth.
pub fn gt_tracks(annotations: &AnnotationSet) -> Result<Vec<GroundTruthTrack>> {
    let mut boxes_by_image: HashMap<u64, &BoxEntry> = HashMap::new();
    for b in annotations.boxes() {
        if boxes_by_image.insert(b.image_id, b).is_some() {
            return Err(Error::AmbiguousAnnotation {
                image_id: b.image_id,
            });
        }
    }

    let mut videos: Vec<&str> = annotations
        .images()
        .iter()
        .map(|i| i.video_id.as_str())
        .collect();
    videos.sort_unstable();
    videos.dedup();

    let mut tracks = Vec::with_capacity(videos.len());
    for video in videos {
        let mut points: Vec<GtPoint> = annotations
            .images()
            .iter()
            .filter(|img| img.video_id == video)
            .filter_map(|img| {
                boxes_by_image.get(&img.id).map(|b| GtPoint {
                    frame: img.frame_index,
                    center: b.bbox.center(),
                    size: (b.bbox.w, b.bbox.h),
                })
            })
            .collect();
        points.sort_by_key(|p| p.frame);
        tracks.push(GroundTruthTrack::new(video, points)?);
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(id: u64, frame: u64) -> ImageEntry {
        ImageEntry {
            id,
            file_name: format!("frame_{frame:06}.png"),
            width: 640,
            height: 480,
            frame_index: frame,
            video_id: "6".into(),
        }
    }

    fn abox(id: u64, image_id: u64, bbox: BBox) -> BoxEntry {
        BoxEntry {
            id,
            image_id,
            class_id: 1,
            bbox,
        }
    }

    #[test]
    fn set_invariants_enforced() {
        let bb = BBox {
            x: 9.0,
            y: 19.0,
            w: 41.0,
            h: 61.0,
        };
        assert!(AnnotationSet::new(vec![image(1, 0), image(1, 1)], vec![]).is_err());
        assert!(AnnotationSet::new(vec![image(1, 0)], vec![abox(1, 2, bb)]).is_err());
        assert!(AnnotationSet::new(
            vec![image(1, 0)],
            vec![abox(1, 1, bb), abox(1, 1, bb)]
        )
        .is_err());
        let oob = BBox {
            x: 630.0,
            y: 0.0,
            w: 20.0,
            h: 10.0,
        };
        assert!(AnnotationSet::new(vec![image(1, 0)], vec![abox(1, 1, oob)]).is_err());
        assert!(AnnotationSet::new(vec![image(1, 0)], vec![abox(1, 1, bb)]).is_ok());
    }

    #[test]
    fn bbox_center_arithmetic() {
        let bb = BBox {
            x: 9.0,
            y: 19.0,
            w: 41.0,
            h: 61.0,
        };
        assert_eq!(bb.center(), (29.5, 49.5));
        assert_eq!(bb.area(), 2501.0);
    }

    #[test]
    fn tracks_sorted_by_frame_even_if_input_is_not() {
        let bb = BBox {
            x: 10.0,
            y: 10.0,
            w: 4.0,
            h: 4.0,
        };
        let set = AnnotationSet::new(
            vec![image(1, 5), image(2, 2), image(3, 9)],
            vec![abox(1, 1, bb), abox(2, 2, bb), abox(3, 3, bb)],
        )
        .unwrap();
        let tracks = gt_tracks(&set).unwrap();
        assert_eq!(tracks.len(), 1);
        let frames: Vec<u64> = tracks[0].points().iter().map(|p| p.frame).collect();
        assert_eq!(frames, vec![2, 5, 9]);
    }

    #[test]
    fn two_boxes_on_one_image_is_ambiguous() {
        let bb = BBox {
            x: 10.0,
            y: 10.0,
            w: 4.0,
            h: 4.0,
        };
        let bb2 = BBox {
            x: 40.0,
            y: 40.0,
            w: 4.0,
            h: 4.0,
        };
        let images = vec![image(1, 0)];
        let boxes = vec![abox(1, 1, bb), abox(2, 1, bb2)];
        let set = AnnotationSet::new(images, boxes).unwrap();
        assert!(matches!(
            gt_tracks(&set),
            Err(Error::AmbiguousAnnotation { image_id: 1 })
        ));
    }

    #[test]
    fn images_without_boxes_leave_gt_gaps() {
        let bb = BBox {
            x: 10.0,
            y: 10.0,
            w: 4.0,
            h: 4.0,
        };
        let set = AnnotationSet::new(
            vec![image(1, 0), image(2, 1), image(3, 2)],
            vec![abox(1, 1, bb), abox(2, 3, bb)],
        )
        .unwrap();
        let tracks = gt_tracks(&set).unwrap();
        let frames: Vec<u64> = tracks[0].points().iter().map(|p| p.frame).collect();
        assert_eq!(frames, vec![0, 2]);
    }

    #[test]
    fn full_length_video_track() {
        // A fully annotated 1042-frame video yields a 1042-entry track.
        let bb = BBox {
            x: 100.0,
            y: 100.0,
            w: 20.0,
            h: 30.0,
        };
        let images: Vec<ImageEntry> = (0..1042).map(|f| image(f + 1, f)).collect();
        let boxes: Vec<BoxEntry> = (0..1042).map(|f| abox(f + 1, f + 1, bb)).collect();
        let set = AnnotationSet::new(images, boxes).unwrap();
        let tracks = gt_tracks(&set).unwrap();
        assert_eq!(tracks[0].points().len(), 1042);
        assert_eq!(tracks[0].max_frame(), Some(1041));
    }
}
