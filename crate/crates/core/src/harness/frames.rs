//! Per-dropoff snapshots of a sequence as text and SVG.
//!
//! Text legend: `#` obstacle, `.` free, `s`/`g`/`b` empty start / goal /
//! both cell, `T` tile off the goal, `O` tile on a goal cell, `P` the tile
//! about to be picked up, `D` the cell it is placed on.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::grid::Cell;
use crate::mapfile::MapFile;
use crate::planner::Dropoff;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: usize,
    pub tiles: Vec<Cell>,
    /// The dropoff applied to reach the next frame, if any.
    pub next: Option<Dropoff>,
    pub goal_overlap: usize,
}

/// `sequence.len() + 1` frames, the last one without an active move. The
/// sequence is assumed valid; see the validator for checking.
pub fn frames(mf: &MapFile, sequence: &[Dropoff]) -> Vec<Frame> {
    let goal: HashSet<Cell> = mf.goal.iter().copied().collect();
    let mut tiles: Vec<Cell> = mf.start.clone();
    tiles.sort();
    let mut out = Vec::with_capacity(sequence.len() + 1);
    for i in 0..=sequence.len() {
        let next = sequence.get(i).copied();
        let goal_overlap = tiles.iter().filter(|c| goal.contains(c)).count();
        out.push(Frame {
            index: i,
            tiles: tiles.clone(),
            next,
            goal_overlap,
        });
        if let Some(d) = next {
            tiles.retain(|&c| c != d.source);
            tiles.push(d.target);
            tiles.sort();
        }
    }
    out
}

pub fn render_text(mf: &MapFile, frame: &Frame, total: usize) -> String {
    let tiles: HashSet<Cell> = frame.tiles.iter().copied().collect();
    let mut out = String::new();
    match frame.next {
        Some(d) => writeln!(
            out,
            "frame {}/{} pick {} place {} d_P {} d_D {}",
            frame.index, total, d.source, d.target, d.pickup_dist, d.dropoff_dist
        ),
        None => writeln!(out, "frame {}/{} final", frame.index, total),
    }
    .unwrap();
    writeln!(out, "goal overlap {}", frame.goal_overlap).unwrap();
    for y in 0..mf.map.height() {
        for x in 0..mf.map.width() {
            let c = Cell::new(x, y);
            let (s, g) = (mf.start.contains(&c), mf.goal.contains(&c));
            let ch = if frame.next.is_some_and(|d| d.source == c) {
                'P'
            } else if frame.next.is_some_and(|d| d.target == c) {
                'D'
            } else if mf.map.is_obstacle(c) {
                '#'
            } else if tiles.contains(&c) {
                if g {
                    'O'
                } else {
                    'T'
                }
            } else {
                match (s, g) {
                    (true, true) => 'b',
                    (true, false) => 's',
                    (false, true) => 'g',
                    (false, false) => '.',
                }
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}

pub fn render_svg(mf: &MapFile, frame: &Frame) -> String {
    const UNIT: i32 = 20;
    let (w, h) = (mf.map.width(), mf.map.height());
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w * UNIT,
        h * UNIT,
        w * UNIT,
        h * UNIT
    )
    .unwrap();
    let mut rect = |c: Cell, fill: &str, inset: i32| {
        writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="#999" stroke-width="0.5"/>"##,
            c.x * UNIT + inset,
            c.y * UNIT + inset,
            UNIT - 2 * inset,
            UNIT - 2 * inset
        )
        .unwrap();
    };
    for c in mf.map.cells() {
        let (s, g) = (mf.start.contains(&c), mf.goal.contains(&c));
        let fill = if mf.map.is_obstacle(c) {
            "#333333"
        } else {
            match (s, g) {
                (true, true) => "#b3e0d0",
                (true, false) => "#add8e6",
                (false, true) => "#90ee90",
                (false, false) => "#ffffff",
            }
        };
        rect(c, fill, 0);
    }
    for &c in &frame.tiles {
        rect(c, "#d62728", 3);
    }
    if let Some(d) = frame.next {
        rect(d.source, "#ff7f0e", 6);
        rect(d.target, "#1f77b4", 6);
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `frame_NNNN.txt` and `frame_NNNN.svg` for every frame; returns
/// the frame count.
pub fn write_frames(mf: &MapFile, sequence: &[Dropoff], dir: &Path) -> std::io::Result<usize> {
    std::fs::create_dir_all(dir)?;
    let all = frames(mf, sequence);
    for f in &all {
        std::fs::write(
            dir.join(format!("frame_{:04}.txt", f.index)),
            render_text(mf, f, sequence.len()),
        )?;
        std::fs::write(dir.join(format!("frame_{:04}.svg", f.index)), render_svg(mf, f))?;
    }
    Ok(all.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sequence_gives_one_frame() {
        let mf = MapFile::parse("3 1\nBB.\n").unwrap();
        let f = frames(&mf, &[]);
        assert_eq!(f.len(), 1);
        assert_eq!(render_text(&mf, &f[0], 0), "frame 0/0 final\ngoal overlap 2\nOO.\n");
    }

    #[test]
    fn marks_active_cells() {
        let mf = MapFile::parse("3 1\nSBG\n").unwrap();
        let d = Dropoff {
            source: Cell::new(0, 0),
            target: Cell::new(2, 0),
            pickup_dist: 0,
            dropoff_dist: 2,
        };
        let f = frames(&mf, &[d]);
        assert_eq!(f.len(), 2);
        assert!(render_text(&mf, &f[0], 1).ends_with("POD\n"));
        assert!(render_text(&mf, &f[1], 1).ends_with("sOO\n"));
        assert!(render_svg(&mf, &f[0]).starts_with("<svg"));
    }
}
