//! XYZ conformer ingestion. Multi-frame files (frames concatenated back to
//! back) supply multiple conformers for one molecule.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum XyzError {
    #[error("xyz format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("xyz declares {declared} atoms but frame has {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

/// One conformer: element symbols in file order plus coordinates in Å.
#[derive(Debug, Clone, PartialEq)]
pub struct XyzFrame {
    pub elements: Vec<String>,
    pub coords: Vec<[f64; 3]>,
}

/// Parse every frame in an XYZ string. Each frame is a count line, a comment
/// line, then `El x y z` rows; blank lines between frames are tolerated.
pub fn parse_xyz_frames(text: &str) -> Result<Vec<XyzFrame>, XyzError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().collect();
    let mut frames = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        // skip blank separator lines
        if lines[i].1.trim().is_empty() {
            i += 1;
            continue;
        }
        let (line_no, count_line) = lines[i];
        let declared: usize = count_line.trim().parse().map_err(|_| XyzError::Format {
            line: line_no + 1,
            msg: format!("expected atom count, found {:?}", count_line.trim()),
        })?;
        if declared == 0 {
            return Err(XyzError::Format { line: line_no + 1, msg: "atom count must be positive".into() });
        }
        i += 1; // comment line, contents ignored
        if i >= lines.len() {
            return Err(XyzError::CountMismatch { declared, found: 0 });
        }
        i += 1;

        let mut frame = XyzFrame { elements: Vec::with_capacity(declared), coords: Vec::with_capacity(declared) };
        for k in 0..declared {
            let Some(&(line_no, row)) = lines.get(i) else {
                return Err(XyzError::CountMismatch { declared, found: k });
            };
            if row.trim().is_empty() {
                return Err(XyzError::CountMismatch { declared, found: k });
            }
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(XyzError::Format {
                    line: line_no + 1,
                    msg: format!("expected 'El x y z', found {} fields", fields.len()),
                });
            }
            let mut xyz = [0.0f64; 3];
            for (d, f) in fields[1..].iter().enumerate() {
                xyz[d] = f.parse().map_err(|_| XyzError::Format {
                    line: line_no + 1,
                    msg: format!("bad coordinate {f:?}"),
                })?;
                if !xyz[d].is_finite() {
                    return Err(XyzError::Format { line: line_no + 1, msg: "non-finite coordinate".into() });
                }
            }
            frame.elements.push(fields[0].to_string());
            frame.coords.push(xyz);
            i += 1;
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(XyzError::Format { line: 1, msg: "no frames in file".into() });
    }
    Ok(frames)
}

/// Load the first conformer of an XYZ file.
pub fn load_conformer(path: &std::path::Path) -> Result<XyzFrame, XyzError> {
    Ok(load_conformers(path)?.remove(0))
}

/// Load all conformers of a multi-frame XYZ file.
pub fn load_conformers(path: &std::path::Path) -> Result<Vec<XyzFrame>, XyzError> {
    let text = std::fs::read_to_string(path).map_err(|e| XyzError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_xyz_frames(&text)
}

/// Render one frame back to XYZ text (used by the toy-data writers).
pub fn write_xyz_frame(frame: &XyzFrame, comment: &str) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "{}", frame.elements.len()).unwrap();
    writeln!(out, "{comment}").unwrap();
    for (el, c) in frame.elements.iter().zip(&frame.coords) {
        writeln!(out, "{el} {} {} {}", c[0], c[1], c[2]).unwrap();
    }
    out
}
