//! Pascal VOC XML annotations: parse LabelImg output, render it back for
//! corpus generation.
//!
//! VOC bounding boxes are 1-based inclusive `(xmin, ymin, xmax, ymax)`;
//! they convert to 0-based `(x, y, w, h)` as
//! `(xmin-1, ymin-1, xmax-xmin+1, ymax-ymin+1)`.

use roxmltree::{Document, Node};

use super::{AnnotationSet, BBox, BoxEntry, ImageEntry};
use crate::error::{Error, Result};

fn child<'a>(node: Node<'a, 'a>, name: &str) -> Option<Node<'a, 'a>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, 'a>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|n| n.text()).map(str::trim)
}

fn required_number(node: Node, name: &str, index: usize) -> Result<f64> {
    let text = child_text(node, name).ok_or_else(|| Error::VocValidation {
        index,
        message: format!("missing <{name}> element"),
    })?;
    text.parse::<f64>().map_err(|_| Error::VocValidation {
        index,
        message: format!("<{name}> is not a number: {text:?}"),
    })
}

/// Frame index encoded as trailing digits of the file stem, if any.
fn trailing_frame_number(file_name: &str) -> Option<u64> {
    let stem = file_name.rsplit_once('.').map_or(file_name, |(s, _)| s);
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if digits.is_empty() {
        None
    } else {
        digits.parse().ok()
    }
}

/// Parses an ordered list of VOC XML documents into one annotation set.
///
/// Image and annotation ids are assigned in input order starting at 1. The
/// frame index comes from trailing digits in each filename; if any document
/// lacks them, all frame indices fall back to the lexicographic rank of the
/// filename. The video id is the `<folder>` element (`"unknown"` if absent).
pub fn parse_voc<S: AsRef<str>>(documents: &[S]) -> Result<AnnotationSet> {
    struct Parsed {
        file_name: String,
        video_id: String,
        width: u32,
        height: u32,
        boxes: Vec<BBox>,
    }

    let mut parsed = Vec::with_capacity(documents.len());
    for (index, text) in documents.iter().enumerate() {
        let doc = Document::parse(text.as_ref()).map_err(|e| Error::VocParse {
            index,
            message: e.to_string(),
        })?;
        let root = doc.root_element();

        let file_name = child_text(root, "filename")
            .ok_or_else(|| Error::VocValidation {
                index,
                message: "missing <filename> element".into(),
            })?
            .to_string();
        let video_id = child_text(root, "folder").unwrap_or("unknown").to_string();

        let size = child(root, "size").ok_or_else(|| Error::VocValidation {
            index,
            message: "missing <size> element".into(),
        })?;
        let width = required_number(size, "width", index)?;
        let height = required_number(size, "height", index)?;
        if width < 1.0 || height < 1.0 || width.fract() != 0.0 || height.fract() != 0.0 {
            return Err(Error::VocValidation {
                index,
                message: format!("bad image size {width}x{height}"),
            });
        }

        let mut boxes = Vec::new();
        for object in root.children().filter(|n| n.has_tag_name("object")) {
            let bnd = child(object, "bndbox").ok_or_else(|| Error::VocValidation {
                index,
                message: "object without <bndbox>".into(),
            })?;
            let xmin = required_number(bnd, "xmin", index)?;
            let ymin = required_number(bnd, "ymin", index)?;
            let xmax = required_number(bnd, "xmax", index)?;
            let ymax = required_number(bnd, "ymax", index)?;
            if xmax < xmin || ymax < ymin {
                return Err(Error::VocValidation {
                    index,
                    message: format!(
                        "degenerate bndbox ({xmin},{ymin},{xmax},{ymax}): max < min"
                    ),
                });
            }
            if xmin < 1.0 || ymin < 1.0 || xmax > width || ymax > height {
                return Err(Error::VocValidation {
                    index,
                    message: format!(
                        "bndbox ({xmin},{ymin},{xmax},{ymax}) outside {width}x{height} image"
                    ),
                });
            }
            boxes.push(BBox {
                x: xmin - 1.0,
                y: ymin - 1.0,
                w: xmax - xmin + 1.0,
                h: ymax - ymin + 1.0,
            });
        }

        parsed.push(Parsed {
            file_name,
            video_id,
            width: width as u32,
            height: height as u32,
            boxes,
        });
    }

    let numeric: Vec<Option<u64>> = parsed
        .iter()
        .map(|p| trailing_frame_number(&p.file_name))
        .collect();
    let frame_indices: Vec<u64> = if numeric.iter().all(Option::is_some) {
        numeric.into_iter().flatten().collect()
    } else {
        let mut names: Vec<&str> = parsed.iter().map(|p| p.file_name.as_str()).collect();
        names.sort_unstable();
        parsed
            .iter()
            .map(|p| names.iter().position(|&n| n == p.file_name).unwrap() as u64)
            .collect()
    };

    let mut images = Vec::with_capacity(parsed.len());
    let mut boxes = Vec::new();
    let mut next_box_id = 1u64;
    for (i, p) in parsed.into_iter().enumerate() {
        let image_id = i as u64 + 1;
        for bbox in p.boxes {
            boxes.push(BoxEntry {
                id: next_box_id,
                image_id,
                class_id: 1,
                bbox,
            });
            next_box_id += 1;
        }
        images.push(ImageEntry {
            id: image_id,
            file_name: p.file_name,
            width: p.width,
            height: p.height,
            frame_index: frame_indices[i],
            video_id: p.video_id,
        });
    }
    AnnotationSet::new(images, boxes)
}

fn fmt_coord(v: f64) -> String {
    format!("{v}")
}

/// Renders one VOC XML document per image, the inverse of [`parse_voc`].
///
/// Round-trips exactly on sets `parse_voc` itself produces: sequential ids,
/// filenames with trailing frame digits, single apex class.
pub fn render_voc(annotations: &AnnotationSet) -> Vec<String> {
    annotations
        .images()
        .iter()
        .map(|img| {
            let mut xml = String::new();
            xml.push_str("<annotation>\n");
            xml.push_str(&format!("  <folder>{}</folder>\n", img.video_id));
            xml.push_str(&format!("  <filename>{}</filename>\n", img.file_name));
            xml.push_str("  <size>\n");
            xml.push_str(&format!("    <width>{}</width>\n", img.width));
            xml.push_str(&format!("    <height>{}</height>\n", img.height));
            xml.push_str("    <depth>3</depth>\n");
            xml.push_str("  </size>\n");
            for b in annotations.boxes().iter().filter(|b| b.image_id == img.id) {
                xml.push_str("  <object>\n");
                xml.push_str("    <name>apex</name>\n");
                xml.push_str("    <bndbox>\n");
                xml.push_str(&format!(
                    "      <xmin>{}</xmin>\n",
                    fmt_coord(b.bbox.x + 1.0)
                ));
                xml.push_str(&format!(
                    "      <ymin>{}</ymin>\n",
                    fmt_coord(b.bbox.y + 1.0)
                ));
                xml.push_str(&format!(
                    "      <xmax>{}</xmax>\n",
                    fmt_coord(b.bbox.x + b.bbox.w)
                ));
                xml.push_str(&format!(
                    "      <ymax>{}</ymax>\n",
                    fmt_coord(b.bbox.y + b.bbox.h)
                ));
                xml.push_str("    </bndbox>\n");
                xml.push_str("  </object>\n");
            }
            xml.push_str("</annotation>\n");
            xml
        })
        .collect()
}
