//! Marker positions from the auxiliary file, and the ground-truth boxes
//! built from them.
//!
//! Marker records give only the baseline position of each element's left
//! and right edge. A box is formed by extending a fixed font height above
//! the baseline. An element whose start and end marks sit on different
//! baselines of one page was broken across lines and becomes two boxes.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::geom::BBox;
use crate::marker::{end_name, start_name, HyphenPart, SgtElement};
use crate::ocr::OcrLine;

/// TeX points per inch.
pub const PT_PER_INCH: f64 = 72.27;
/// Scaled points per TeX point.
pub const SP_PER_PT: f64 = 65536.0;
pub const DEFAULT_FONT_HEIGHT_PT: f64 = 11.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxGrammar {
    /// `\savepointas{name}{pgfid}{dx}{dy}` + `\pgfsyspdfmark {pgfid}{x}{y}` + `\savepicturepage{pgfid}{page}`.
    #[default]
    Tikzmark,
    /// `\zref@newlabel{name}{\posx{x}\posy{y}\abspage{page}}`.
    Savepos,
}

impl FromStr for AuxGrammar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tikzmark" => Ok(AuxGrammar::Tikzmark),
            "savepos" => Ok(AuxGrammar::Savepos),
            other => Err(format!("unknown aux grammar {other:?} (expected \"tikzmark\" or \"savepos\")")),
        }
    }
}

/// A named position, in TeX points from the bottom-left page corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub name: String,
    pub page: u32,
    pub x_pt: f64,
    pub y_pt: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuxParse {
    pub records: Vec<MarkRecord>,
    /// Lines that matched a record shape but could not be interpreted.
    pub warnings: usize,
}

struct TikzRes {
    point: Regex,
    mark: Regex,
    page: Regex,
}

fn tikz_res() -> &'static TikzRes {
    static RE: OnceLock<TikzRes> = OnceLock::new();
    RE.get_or_init(|| TikzRes {
        point: Regex::new(r"^\\savepointas\s*\{([^}]*)\}\s*\{([^}]*)\}\s*\{([^}]*)\}\s*\{([^}]*)\}").expect("regex"),
        mark: Regex::new(r"^\\pgfsyspdfmark\s*\{([^}]*)\}\s*\{([^}]*)\}\s*\{([^}]*)\}").expect("regex"),
        page: Regex::new(r"^\\savepicturepage\s*\{([^}]*)\}\s*\{([^}]*)\}").expect("regex"),
    })
}

fn zref_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\\zref@newlabel\s*\{([^}]*)\}\s*\{(.*)\}\s*$").expect("regex"))
}

fn zref_prop(body: &str, prop: &str) -> Option<String> {
    let key = format!("\\{prop}{{");
    let at = body.find(&key)? + key.len();
    let end = body[at..].find('}')?;
    Some(body[at..at + end].to_owned())
}

/// Parses a dimension like `12.5pt` or `0pt` into points.
fn parse_pt(s: &str) -> Option<f64> {
    s.trim().strip_suffix("pt").unwrap_or(s.trim()).trim().parse().ok()
}

fn parse_sp(s: &str) -> Option<f64> {
    s.trim().parse::<i64>().ok().map(|v| v as f64 / SP_PER_PT)
}

/// Reads mark records from aux text. Lines not shaped like a record are
/// ignored; record-shaped lines with unusable fields bump `warnings`.
pub fn parse_aux(aux_text: &str, grammar: AuxGrammar) -> AuxParse {
    match grammar {
        AuxGrammar::Tikzmark => parse_tikzmark(aux_text),
        AuxGrammar::Savepos => parse_savepos(aux_text),
    }
}

fn parse_tikzmark(aux_text: &str) -> AuxParse {
    let re = tikz_res();
    let mut out = AuxParse::default();
    // name -> (pgfid, dx, dy), in file order
    let mut points: Vec<(String, String, f64, f64)> = Vec::new();
    let mut marks: HashMap<String, (f64, f64)> = HashMap::new();
    let mut pages: HashMap<String, u32> = HashMap::new();

    for line in aux_text.lines().map(str::trim) {
        if let Some(c) = re.point.captures(line) {
            match (parse_pt(&c[3]), parse_pt(&c[4])) {
                (Some(dx), Some(dy)) => points.push((c[1].to_owned(), c[2].to_owned(), dx, dy)),
                _ => out.warnings += 1,
            }
        } else if let Some(c) = re.mark.captures(line) {
            match (parse_sp(&c[2]), parse_sp(&c[3])) {
                (Some(x), Some(y)) => {
                    marks.insert(c[1].to_owned(), (x, y));
                }
                _ => out.warnings += 1,
            }
        } else if let Some(c) = re.page.captures(line) {
            match c[2].trim().parse::<u32>() {
                Ok(p) if p >= 1 => {
                    pages.insert(c[1].to_owned(), p);
                }
                _ => out.warnings += 1,
            }
        }
    }

    for (name, id, dx, dy) in points {
        match (marks.get(&id), pages.get(&id)) {
            (Some(&(x, y)), Some(&page)) => out.records.push(MarkRecord { name, page, x_pt: x + dx, y_pt: y + dy }),
            _ => {
                log::warn!("mark {name} refers to picture {id} without position or page");
                out.warnings += 1;
            }
        }
    }
    out
}

fn parse_savepos(aux_text: &str) -> AuxParse {
    let mut out = AuxParse::default();
    for line in aux_text.lines().map(str::trim) {
        let Some(c) = zref_re().captures(line) else { continue };
        let body = &c[2];
        let x = zref_prop(body, "posx").and_then(|v| parse_sp(&v));
        let y = zref_prop(body, "posy").and_then(|v| parse_sp(&v));
        let page = zref_prop(body, "abspage").and_then(|v| v.trim().parse::<u32>().ok()).filter(|&p| p >= 1);
        match (x, y, page) {
            (Some(x_pt), Some(y_pt), Some(page)) => {
                out.records.push(MarkRecord { name: c[1].to_owned(), page, x_pt, y_pt })
            }
            // zref labels without position properties are unrelated labels
            _ if !body.contains("\\posx") => {}
            _ => out.warnings += 1,
        }
    }
    out
}

/// Raster geometry of one rendered page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageGeometry {
    pub page: u32,
    pub width_px: u32,
    pub height_px: u32,
    /// Fractional so that 72.27 (1 px per pt) is expressible.
    pub dpi: f64,
    pub font_height_pt: f64,
}

impl PageGeometry {
    fn scale(&self) -> f64 {
        self.dpi / PT_PER_INCH
    }

    pub fn x_px(&self, x_pt: f64) -> f64 {
        round_half_up(x_pt * self.scale())
    }

    /// Flips from bottom-left to top-left origin.
    pub fn y_px(&self, y_pt: f64) -> f64 {
        round_half_up(f64::from(self.height_px) - y_pt * self.scale())
    }

    fn unrounded_y(&self, y_pt: f64) -> f64 {
        f64::from(self.height_px) - y_pt * self.scale()
    }
}

pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgtBox {
    pub element: SgtElement,
    pub page: u32,
    pub bbox: BBox,
    pub hyphen_part: Option<HyphenPart>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    /// Elements lacking a start or end record.
    pub missing_marks: usize,
    /// Start and end on different pages.
    pub multi_page: usize,
    /// Broken across lines but no OCR line matched a baseline.
    pub unmatched_hyphen: usize,
    /// End mark above the start mark (column or float jump).
    pub reversed: usize,
    /// Page has no geometry.
    pub unknown_page: usize,
}

impl DropCounts {
    /// Drops among elements that had both marks.
    pub fn dropped_paired(&self) -> usize {
        self.multi_page + self.unmatched_hyphen + self.reversed + self.unknown_page
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoxBuild {
    pub boxes: Vec<SgtBox>,
    pub dropped: DropCounts,
    pub paired: usize,
    pub hyphen_splits: usize,
}

/// Builds pixel boxes for every element whose marks were recorded.
///
/// `line_extents` holds OCR text-line boxes per page; they supply the line
/// ends for elements broken across lines.
pub fn build_sgt_boxes(
    records: &[MarkRecord],
    elements: &[SgtElement],
    geoms: &[PageGeometry],
    line_extents: &HashMap<u32, Vec<OcrLine>>,
) -> BoxBuild {
    let by_name: HashMap<&str, &MarkRecord> = records.iter().map(|r| (r.name.as_str(), r)).collect();
    let mut out = BoxBuild::default();

    for el in elements {
        let (Some(start), Some(end)) =
            (by_name.get(start_name(el.mark_id).as_str()), by_name.get(end_name(el.mark_id).as_str()))
        else {
            log::warn!("element {} has no complete mark pair", el.mark_id);
            out.dropped.missing_marks += 1;
            continue;
        };
        out.paired += 1;

        if start.page != end.page {
            out.dropped.multi_page += 1;
            continue;
        }
        let Some(geom) = geoms.iter().find(|g| g.page == start.page) else {
            out.dropped.unknown_page += 1;
            continue;
        };
        let font_pt = geom.font_height_pt;
        let same_line = (start.y_pt - end.y_pt).abs() < font_pt / 2.0;

        if same_line {
            let baseline = start.y_pt;
            let bbox = BBox::new(
                geom.x_px(start.x_pt),
                geom.y_px(baseline + font_pt),
                geom.x_px(end.x_pt),
                geom.y_px(baseline),
            );
            if !bbox.is_valid() {
                out.dropped.reversed += 1;
                continue;
            }
            out.boxes.push(SgtBox { element: el.clone(), page: start.page, bbox, hyphen_part: None });
            continue;
        }
        if end.y_pt > start.y_pt {
            out.dropped.reversed += 1;
            continue;
        }

        let lines = line_extents.get(&start.page).map(Vec::as_slice).unwrap_or(&[]);
        let first_line = line_at(lines, geom.unrounded_y(start.y_pt), geom.x_px(start.x_pt));
        let second_line = line_at(lines, geom.unrounded_y(end.y_pt), geom.x_px(end.x_pt));
        let (Some(first_line), Some(second_line)) = (first_line, second_line) else {
            log::warn!("element {} is broken across lines but no OCR line matches", el.mark_id);
            out.dropped.unmatched_hyphen += 1;
            continue;
        };
        let first = BBox::new(
            geom.x_px(start.x_pt),
            geom.y_px(start.y_pt + font_pt),
            first_line.bbox.x1,
            geom.y_px(start.y_pt),
        );
        let second = BBox::new(
            second_line.bbox.x0,
            geom.y_px(end.y_pt + font_pt),
            geom.x_px(end.x_pt),
            geom.y_px(end.y_pt),
        );
        if !first.is_valid() || !second.is_valid() {
            out.dropped.unmatched_hyphen += 1;
            continue;
        }
        out.hyphen_splits += 1;
        for (bbox, part) in [(first, HyphenPart::First), (second, HyphenPart::Second)] {
            let mut element = el.clone();
            element.hyphen_part = Some(part);
            out.boxes.push(SgtBox { element, page: start.page, bbox, hyphen_part: Some(part) });
        }
    }
    out
}

/// The OCR line whose vertical extent contains `baseline_px`, preferring
/// the one horizontally closest to `x_px`.
fn line_at(lines: &[OcrLine], baseline_px: f64, x_px: f64) -> Option<&OcrLine> {
    lines
        .iter()
        .filter(|l| l.bbox.y0 <= baseline_px && baseline_px <= l.bbox.y1)
        .min_by(|a, b| {
            let da = (a.bbox.x0 - x_px).max(x_px - a.bbox.x1).max(0.0);
            let db = (b.bbox.x0 - x_px).max(x_px - b.bbox.x1).max(0.0);
            da.total_cmp(&db)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marker::ElementType;
    use crate::ocr::LineId;

    fn element(id: usize) -> SgtElement {
        SgtElement { mark_id: id, etype: ElementType::Word, raw_tex: format!("w{id}"), source_span: 0..0, hyphen_part: None }
    }

    fn rec(name: &str, page: u32, x: f64, y: f64) -> MarkRecord {
        MarkRecord { name: name.into(), page, x_pt: x, y_pt: y }
    }

    fn geom(page: u32) -> PageGeometry {
        PageGeometry { page, width_px: 800, height_px: 1000, dpi: PT_PER_INCH, font_height_pt: 11.0 }
    }

    #[test]
    fn empty_aux() {
        assert_eq!(parse_aux("", AuxGrammar::Tikzmark), AuxParse::default());
        assert_eq!(parse_aux("", AuxGrammar::Savepos), AuxParse::default());
    }

    #[test]
    fn tikzmark_records_resolve() {
        let aux = "\\relax\n\\pgfsyspdfmark {pgfid1}{6553600}{45875200}\n\\savepointas{s0}{pgfid1}{0pt}{0pt}\n\\savepicturepage{pgfid1}{1}\n";
        let parsed = parse_aux(aux, AuxGrammar::Tikzmark);
        assert_eq!(parsed.warnings, 0);
        assert_eq!(parsed.records, vec![rec("s0", 1, 100.0, 700.0)]);
    }

    #[test]
    fn non_numeric_coordinate_warns() {
        let aux = "\\pgfsyspdfmark {pgfid1}{abc}{45875200}\n";
        assert_eq!(parse_aux(aux, AuxGrammar::Tikzmark).warnings, 1);
        let aux = "\\zref@newlabel{s0}{\\posx{x1}\\posy{10}\\abspage{1}}\n";
        let parsed = parse_aux(aux, AuxGrammar::Savepos);
        assert_eq!((parsed.records.len(), parsed.warnings), (0, 1));
    }

    #[test]
    fn savepos_records() {
        let aux = "\\zref@newlabel{e3}{\\posx{6553600}\\posy{65536}\\abspage{2}}\n\\zref@newlabel{sec:a}{\\default{1}\\page{1}}\n";
        let parsed = parse_aux(aux, AuxGrammar::Savepos);
        assert_eq!(parsed.records, vec![rec("e3", 2, 100.0, 1.0)]);
        assert_eq!(parsed.warnings, 0);
    }

    #[test]
    fn eleven_point_box() {
        let records = [rec("s0", 1, 100.0, 700.0), rec("e0", 1, 150.0, 700.0)];
        let built = build_sgt_boxes(&records, &[element(0)], &[geom(1)], &HashMap::new());
        assert_eq!(built.boxes.len(), 1);
        assert_eq!(built.boxes[0].bbox, BBox::new(100.0, 289.0, 150.0, 300.0));
        assert_eq!(built.boxes[0].hyphen_part, None);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(2.5), 3.0);
        assert_eq!(round_half_up(2.4999), 2.0);
        assert_eq!(round_half_up(-0.5), 0.0);
    }

    #[test]
    fn multi_page_dropped() {
        let records = [rec("s0", 1, 100.0, 50.0), rec("e0", 2, 30.0, 700.0)];
        let built = build_sgt_boxes(&records, &[element(0)], &[geom(1), geom(2)], &HashMap::new());
        assert!(built.boxes.is_empty());
        assert_eq!(built.dropped.multi_page, 1);
    }

    #[test]
    fn missing_end_mark() {
        let built = build_sgt_boxes(&[rec("s0", 1, 1.0, 1.0)], &[element(0)], &[geom(1)], &HashMap::new());
        assert_eq!(built.dropped.missing_marks, 1);
        assert_eq!(built.paired, 0);
    }

    #[test]
    fn hyphen_split_uses_line_extents() {
        let g = PageGeometry { page: 1, width_px: 1000, height_px: 1000, dpi: 72.0, font_height_pt: 11.0 };
        let s = 72.0 / PT_PER_INCH;
        let line = |n: u32, x0: f64, y0: f64, x1: f64, y1: f64| OcrLine {
            id: LineId { page: 1, block: 1, paragraph: 1, line: n },
            bbox: BBox::new(x0, y0, x1, y1),
        };
        let base1 = 1000.0 - 700.0 * s;
        let base2 = 1000.0 - 688.0 * s;
        let lines = vec![line(1, 50.0, base1 - 9.0, 400.0, base1 + 2.0), line(2, 52.0, base2 - 9.0, 390.0, base2 + 2.0)];
        let extents = HashMap::from([(1, lines)]);
        let records = [rec("s0", 1, 350.0, 700.0), rec("e0", 1, 80.0, 688.0)];
        let built = build_sgt_boxes(&records, &[element(0)], &[g], &extents);
        assert_eq!(built.hyphen_splits, 1);
        assert_eq!(built.boxes.len(), 2);
        assert_eq!(built.boxes[0].hyphen_part, Some(HyphenPart::First));
        assert_eq!(built.boxes[0].bbox.x1, 400.0);
        assert_eq!(built.boxes[1].hyphen_part, Some(HyphenPart::Second));
        assert_eq!(built.boxes[1].bbox.x0, 52.0);
        // no lines: dropped
        let built = build_sgt_boxes(&records, &[element(0)], &[g], &HashMap::new());
        assert_eq!(built.dropped.unmatched_hyphen, 1);
    }
}
