use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DensityMap, Normalization};
use crate::error::{Error, Result};

/// Column order of fixation CSV files.
pub const FIXATION_CSV_HEADER: [&str; 4] = ["stimulus_id", "observer_id", "x", "y"];

/// Observer id given to pooled fixation sets.
pub const AGGREGATE_OBSERVER: &str = "*";

/// A fixation location in stimulus pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Fixations of one observer on one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationSet {
    pub stimulus_id: String,
    pub observer_id: String,
    width: usize,
    height: usize,
    points: Vec<Point>,
}

impl FixationSet {
    /// Build a set, checking `0 ≤ x < width` and `0 ≤ y < height` for every point.
    pub fn new(
        stimulus_id: impl Into<String>,
        observer_id: impl Into<String>,
        (width, height): (usize, usize),
        points: Vec<Point>,
    ) -> Result<Self> {
        let set = Self {
            stimulus_id: stimulus_id.into(),
            observer_id: observer_id.into(),
            width,
            height,
            points,
        };
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "stimulus '{}' has empty size {width}×{height}",
                set.stimulus_id
            )));
        }
        if let Some(p) = set.points.iter().find(|p| !set.contains(p)) {
            return Err(Error::Validation(format!(
                "stimulus '{}', observer '{}': point ({}, {}) outside {width}×{height}",
                set.stimulus_id, set.observer_id, p.x, p.y
            )));
        }
        Ok(set)
    }

    fn contains(&self, p: &Point) -> bool {
        (0.0..self.width as f64).contains(&p.x) && (0.0..self.height as f64).contains(&p.y)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixel index of a point: round half up, clamped into the raster.
    pub fn pixel(&self, p: &Point) -> (usize, usize) {
        let px = (p.x + 0.5).floor().clamp(0.0, (self.width - 1) as f64) as usize;
        let py = (p.y + 0.5).floor().clamp(0.0, (self.height - 1) as f64) as usize;
        (px, py)
    }

    /// Flat row-major pixel indices of all points, duplicates kept.
    pub fn pixel_indices(&self) -> Vec<usize> {
        self.points
            .iter()
            .map(|p| {
                let (x, y) = self.pixel(p);
                y * self.width + x
            })
            .collect()
    }
}

/// Where stimulus dimensions come from when parsing fixation files.
#[derive(Debug, Clone)]
pub enum StimulusSizes {
    /// Every stimulus has the same size.
    Uniform(usize, usize),
    /// Per-stimulus sizes; unknown stimulus ids are rejected.
    PerStimulus(BTreeMap<String, (usize, usize)>),
}

impl StimulusSizes {
    fn lookup(&self, stimulus: &str) -> Option<(usize, usize)> {
        match self {
            StimulusSizes::Uniform(w, h) => Some((*w, *h)),
            StimulusSizes::PerStimulus(map) => map.get(stimulus).copied(),
        }
    }
}

/// Parse a fixation CSV into one [`FixationSet`] per (stimulus, observer).
///
/// Sets come back sorted by stimulus id, then observer id; points keep file
/// order. Lines starting with `#` are comments.
pub fn parse_fixations<R: Read>(reader: R, sizes: &StimulusSizes) -> Result<Vec<FixationSet>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let header_line = headers.position().map_or(1, |p| p.line());
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().ne(FIXATION_CSV_HEADER) {
        return Err(Error::Parse {
            line: header_line,
            message: format!(
                "expected header '{}', found '{}'",
                FIXATION_CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut groups: BTreeMap<(String, String), Vec<Point>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let coord = |i: usize, name: &str| -> Result<f64> {
            let raw = &record[i];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("{name} '{raw}' is not a number"),
                })
        };
        let (x, y) = (coord(2, "x")?, coord(3, "y")?);
        let (stimulus, observer) = (record[0].to_string(), record[1].to_string());
        if stimulus.is_empty() || observer.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty stimulus or observer id".into(),
            });
        }
        let (w, h) = sizes.lookup(&stimulus).ok_or_else(|| {
            Error::Validation(format!("line {line}: unknown stimulus '{stimulus}'"))
        })?;
        if !(0.0..w as f64).contains(&x) || !(0.0..h as f64).contains(&y) {
            return Err(Error::Validation(format!(
                "line {line}: stimulus '{stimulus}', observer '{observer}': point ({x}, {y}) outside {w}×{h}"
            )));
        }
        groups
            .entry((stimulus, observer))
            .or_default()
            .push(Point::new(x, y));
    }

    groups
        .into_iter()
        .map(|((stimulus, observer), points)| {
            let size = sizes.lookup(&stimulus).expect("checked while parsing");
            FixationSet::new(stimulus, observer, size, points)
        })
        .collect()
}

pub fn read_fixations(path: &Path, sizes: &StimulusSizes) -> Result<Vec<FixationSet>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fixations(std::io::BufReader::new(file), sizes)
}

/// Write sets as fixation CSV, in the order given.
pub fn write_fixations<W: Write>(writer: W, sets: &[FixationSet]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(FIXATION_CSV_HEADER)?;
    for set in sets {
        for p in set.points() {
            wtr.write_record([
                set.stimulus_id.as_str(),
                set.observer_id.as_str(),
                &p.x.to_string(),
                &p.y.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<fixation csv>", e))?;
    Ok(())
}

/// Map fixations onto a raster of a different size.
///
/// Coordinates scale linearly and are clamped to `[0, w' − 1] × [0, h' − 1]`.
pub fn rescale_fixations(set: &FixationSet, (width, height): (usize, usize)) -> Result<FixationSet> {
    if width == 0 || height == 0 {
        return Err(Error::Domain(format!(
            "rescale target must be at least 1×1, got {width}×{height}"
        )));
    }
    let sx = width as f64 / set.width as f64;
    let sy = height as f64 / set.height as f64;
    let points = set
        .points
        .iter()
        .map(|p| {
            Point::new(
                (p.x * sx).clamp(0.0, (width - 1) as f64),
                (p.y * sy).clamp(0.0, (height - 1) as f64),
            )
        })
        .collect();
    Ok(FixationSet {
        stimulus_id: set.stimulus_id.clone(),
        observer_id: set.observer_id.clone(),
        width,
        height,
        points,
    })
}

/// Count fixations per pixel.
pub fn rasterize(set: &FixationSet) -> Result<DensityMap> {
    if set.is_empty() {
        return Err(Error::EmptyInput(format!(
            "stimulus '{}', observer '{}' has no fixations",
            set.stimulus_id, set.observer_id
        )));
    }
    let mut values = vec![0.0; set.width * set.height];
    for idx in set.pixel_indices() {
        values[idx] += 1.0;
    }
    DensityMap::new(set.width, set.height, values, Normalization::Raw)
}

/// Pool the fixations of several observers on one stimulus.
///
/// A single set is returned unchanged; otherwise the result carries
/// [`AGGREGATE_OBSERVER`] as its observer id.
pub fn aggregate(sets: &[FixationSet]) -> Result<FixationSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::EmptyInput("no fixation sets to aggregate".into()))?;
    if sets.len() == 1 {
        return Ok(first.clone());
    }
    if let Some(odd) = sets
        .iter()
        .find(|s| s.stimulus_id != first.stimulus_id || s.size() != first.size())
    {
        return Err(Error::Validation(format!(
            "cannot aggregate stimulus '{}' ({}×{}) with '{}' ({}×{})",
            first.stimulus_id, first.width, first.height, odd.stimulus_id, odd.width, odd.height
        )));
    }
    Ok(FixationSet {
        stimulus_id: first.stimulus_id.clone(),
        observer_id: AGGREGATE_OBSERVER.to_string(),
        width: first.width,
        height: first.height,
        points: sets.iter().flat_map(|s| s.points.iter().copied()).collect(),
    })
}
