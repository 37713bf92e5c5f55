//! Plain-text map format.
//!
//! ```text
//! 5 3
//! SS..#
//! .B.G#
//! ...G.
//! ```
//!
//! The first line holds `width height`, followed by `height` rows of exactly
//! `width` characters: `.` free, `#` obstacle, `S` start tile, `G` goal tile,
//! `B` a cell in both start and goal. Row 0 is the top line.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::grid::{Cell, Configuration, GridError, GridMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MapFileError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("start configuration: {0}")]
    Start(GridError),
    #[error("goal configuration: {0}")]
    Goal(GridError),
    #[error("start has {start} tiles but goal has {goal}")]
    SizeMismatch { start: usize, goal: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parsed map file: the workspace plus raw start and goal cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapFile {
    pub map: GridMap,
    pub start: Vec<Cell>,
    pub goal: Vec<Cell>,
}

/// A validated planning instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub map: GridMap,
    pub start: Configuration,
    pub goal: Configuration,
}

impl MapFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| ParseError::new(1, 1, "missing header"))?;
        let mut fields = header.split_whitespace();
        let mut dim = |name: &str| -> Result<i32, ParseError> {
            let raw = fields
                .next()
                .ok_or_else(|| ParseError::new(1, header.len() + 1, format!("missing {name}")))?;
            let col = header.find(raw).unwrap_or(0) + 1;
            match raw.parse::<i32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(ParseError::new(1, col, format!("invalid {name} `{raw}`"))),
            }
        };
        let width = dim("width")?;
        let height = dim("height")?;
        if let Some(extra) = fields.next() {
            let col = header.rfind(extra).unwrap_or(0) + 1;
            return Err(ParseError::new(1, col, "unexpected token in header"));
        }

        let mut map = GridMap::empty(width, height).expect("positive dimensions");
        let mut start = Vec::new();
        let mut goal = Vec::new();
        for y in 0..height {
            let line_no = y as usize + 2;
            let row = lines
                .next()
                .ok_or_else(|| ParseError::new(line_no, 1, format!("expected {height} rows, found {y}")))?;
            let chars: Vec<char> = row.chars().collect();
            if chars.len() != width as usize {
                let column = chars.len().min(width as usize) + 1;
                return Err(ParseError::new(
                    line_no,
                    column,
                    format!("row has {} cells, expected {width}", chars.len()),
                ));
            }
            for (x, ch) in chars.into_iter().enumerate() {
                let c = Cell::new(x as i32, y);
                match ch {
                    '.' => {}
                    '#' => map.set_obstacle(c, true).expect("in bounds"),
                    'S' => start.push(c),
                    'G' => goal.push(c),
                    'B' => {
                        start.push(c);
                        goal.push(c);
                    }
                    other => {
                        return Err(ParseError::new(line_no, x + 1, format!("unknown cell `{other}`")));
                    }
                }
            }
        }
        for (i, rest) in lines.enumerate() {
            if !rest.trim().is_empty() {
                return Err(ParseError::new(
                    height as usize + 2 + i,
                    1,
                    "trailing content after last row",
                ));
            }
        }
        Ok(MapFile { map, start, goal })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MapFileError> {
        let text = std::fs::read_to_string(path)?;
        Ok(MapFile::parse(&text)?)
    }

    pub fn from_instance(instance: &Instance) -> Self {
        MapFile {
            map: instance.map.clone(),
            start: instance.start.tiles().to_vec(),
            goal: instance.goal.tiles().to_vec(),
        }
    }

    /// Canonical text: every line, including the last, ends with `\n`.
    pub fn to_text(&self) -> String {
        let (w, h) = (self.map.width(), self.map.height());
        let mut out = String::with_capacity(((w + 1) * (h + 1)) as usize);
        writeln!(out, "{w} {h}").unwrap();
        for y in 0..h {
            for x in 0..w {
                let c = Cell::new(x, y);
                let (s, g) = (self.start.contains(&c), self.goal.contains(&c));
                out.push(match (self.map.is_obstacle(c), s, g) {
                    (true, _, _) => '#',
                    (false, true, true) => 'B',
                    (false, true, false) => 'S',
                    (false, false, true) => 'G',
                    (false, false, false) => '.',
                });
            }
            out.push('\n');
        }
        out
    }

    /// Checks both configurations and their sizes.
    pub fn instance(&self) -> Result<Instance, MapFileError> {
        let start = Configuration::on_map(self.start.iter().copied(), &self.map).map_err(MapFileError::Start)?;
        let goal = Configuration::on_map(self.goal.iter().copied(), &self.map).map_err(MapFileError::Goal)?;
        if start.len() != goal.len() {
            return Err(MapFileError::SizeMismatch {
                start: start.len(),
                goal: goal.len(),
            });
        }
        Ok(Instance {
            map: self.map.clone(),
            start,
            goal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "5 3\nSS..#\n.B.G#\n...G.\n";

    #[test]
    fn parses_sample() {
        let mf = MapFile::parse(SAMPLE).unwrap();
        assert_eq!(mf.map.width(), 5);
        assert_eq!(mf.map.obstacle_count(), 2);
        assert_eq!(mf.start, vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(1, 1)]);
        assert_eq!(mf.goal, vec![Cell::new(1, 1), Cell::new(3, 1), Cell::new(3, 2)]);
        assert_eq!(mf.to_text(), SAMPLE);
    }

    #[test]
    fn reports_positions() {
        let err = MapFile::parse("3 2\n...\n.x.\n").unwrap_err();
        assert_eq!((err.line, err.column), (3, 2));
        let err = MapFile::parse("3 2\n...\n..\n").unwrap_err();
        assert_eq!((err.line, err.column), (3, 3));
        let err = MapFile::parse("3 2\n...\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = MapFile::parse("3 z\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 3));
        let err = MapFile::parse("").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn instance_validation() {
        let mf = MapFile::parse("3 1\nS.G\n").unwrap();
        assert!(mf.instance().is_ok());
        let mf = MapFile::parse("3 1\nSGG\n").unwrap();
        assert!(matches!(
            mf.instance(),
            Err(MapFileError::SizeMismatch { start: 1, goal: 2 })
        ));
        let mf = MapFile::parse("3 1\nS.S\n").unwrap();
        assert!(matches!(
            mf.instance(),
            Err(MapFileError::Start(GridError::Disconnected))
        ));
    }
}
