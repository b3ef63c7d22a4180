//! Rendering of trial records and targets to portable anymaps:
//! a dimple map (white dots on black), a per-agent trajectory overlay
//! (distinct gray levels), and a target density heat image.

use crate::io::pnm;
use crate::spectral::{DensityMap, Point};
use crate::swarm::TrialRecord;
use crate::{Error, Result};
use std::path::Path;

fn to_pixel(p: Point, extents: [f64; 2], size: usize) -> (usize, usize) {
    let col = ((p[0] / extents[0]) * size as f64) as isize;
    let row = ((1.0 - p[1] / extents[1]) * size as f64) as isize;
    (
        row.clamp(0, size as isize - 1) as usize,
        col.clamp(0, size as isize - 1) as usize,
    )
}

fn check_size(size: usize) -> Result<()> {
    if size == 0 {
        return Err(Error::Config("render size must be positive".into()));
    }
    Ok(())
}

/// White dot per dimple on a black background.
pub fn dimple_map(record: &TrialRecord, extents: [f64; 2], size: usize) -> Result<Vec<u8>> {
    check_size(size)?;
    let mut buf = vec![0u8; size * size];
    for ev in &record.dimples {
        let (r, c) = to_pixel(ev.position, extents, size);
        buf[r * size + c] = 255;
    }
    Ok(buf)
}

/// Gray level assigned to agent `id` of `n`: bright for agent 0, darker
/// for later agents, never black.
pub fn agent_gray(id: usize, n: usize) -> u8 {
    if n <= 1 {
        return 255;
    }
    let span = 175.0;
    (255.0 - span * id as f64 / (n - 1) as f64).round() as u8
}

/// Trajectory overlay: each agent's path drawn in its own gray level.
pub fn trajectory_overlay(record: &TrialRecord, extents: [f64; 2], size: usize) -> Result<Vec<u8>> {
    check_size(size)?;
    let mut buf = vec![0u8; size * size];
    for agent in 0..record.agents {
        let gray = agent_gray(agent, record.agents);
        let mut last: Option<(usize, usize)> = None;
        for row in record.rows.iter().filter(|r| r.agent_id == agent) {
            let px = to_pixel(row.position, extents, size);
            match last {
                Some(prev) => draw_line(&mut buf, size, prev, px, gray),
                None => buf[px.0 * size + px.1] = gray,
            }
            last = Some(px);
        }
    }
    Ok(buf)
}

/// Target density scaled to 0..=255 by its peak.
pub fn density_heat(density: &DensityMap, size: usize) -> Result<Vec<u8>> {
    check_size(size)?;
    let peak = density.values().iter().cloned().fold(0.0, f64::max);
    let mut buf = vec![0u8; size * size];
    for r in 0..size {
        for c in 0..size {
            // nearest-cell sample
            let sr = r * density.rows() / size;
            let sc = c * density.cols() / size;
            buf[r * size + c] = ((density.get(sr, sc) / peak) * 255.0).round() as u8;
        }
    }
    Ok(buf)
}

fn draw_line(buf: &mut [u8], size: usize, from: (usize, usize), to: (usize, usize), gray: u8) {
    // Bresenham on (row, col)
    let (mut r0, mut c0) = (from.0 as isize, from.1 as isize);
    let (r1, c1) = (to.0 as isize, to.1 as isize);
    let dr = (r1 - r0).abs();
    let dc = (c1 - c0).abs();
    let sr = if r0 < r1 { 1 } else { -1 };
    let sc = if c0 < c1 { 1 } else { -1 };
    let mut err = dc - dr;
    loop {
        buf[r0 as usize * size + c0 as usize] = gray;
        if r0 == r1 && c0 == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 > -dr {
            err -= dr;
            c0 += sc;
        }
        if e2 < dc {
            err += dc;
            r0 += sr;
        }
    }
}

/// Renders the standard image set for one trial into `out_dir`:
/// `<stem>_dimples.pgm`, `<stem>_trajectories.ppm`, `<stem>_target.pgm`.
pub fn render_trial(
    record: &TrialRecord,
    target: &DensityMap,
    size: usize,
    out_dir: impl AsRef<Path>,
    stem: &str,
) -> Result<()> {
    let out = out_dir.as_ref();
    let extents = target.extents();
    let dimples = dimple_map(record, extents, size)?;
    pnm::write_pgm(out.join(format!("{stem}_dimples.pgm")), size, size, &dimples)?;
    let traj = trajectory_overlay(record, extents, size)?;
    let rgb: Vec<u8> = traj.iter().flat_map(|g| [*g, *g, *g]).collect();
    pnm::write_ppm(
        out.join(format!("{stem}_trajectories.ppm")),
        size,
        size,
        &rgb,
    )?;
    let heat = density_heat(target, size)?;
    pnm::write_pgm(out.join(format!("{stem}_target.pgm")), size, size, &heat)?;
    Ok(())
}
