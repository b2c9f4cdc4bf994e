//! Stick-figure frames of a trajectory.
//!
//! Frames are plain RGB rasters. Their canonical serialization is binary
//! PPM (`P6`); PNG is used when frames leave the process.

use std::io::Write;

use crate::dynamics::{Morphology, SystemState, Trajectory};
use crate::reward::TaskContext;
use crate::scalar::Real;

pub const DEFAULT_FRAME_RATE: f64 = 10.0;
pub const MAX_FRAMES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB, top row first.
    pub rgb: Vec<u8>,
}

impl Frame {
    fn blank(width: usize, height: usize) -> Self {
        Self { width, height, rgb: vec![255; width * height * 3] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.rgb[i..i + 3].copy_from_slice(&c);
    }

    fn dot(&mut self, x: i64, y: i64, r: i64, c: [u8; 3]) {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    self.put(x + dx, y + dy, c);
                }
            }
        }
    }

    fn line(&mut self, a: (i64, i64), b: (i64, i64), r: i64, c: [u8; 3]) {
        let (mut x, mut y) = a;
        let (dx, dy) = ((b.0 - a.0).abs(), -(b.1 - a.1).abs());
        let (sx, sy) = (if a.0 < b.0 { 1 } else { -1 }, if a.1 < b.1 { 1 } else { -1 });
        let mut err = dx + dy;
        // Endpoints far off screen would make this loop long; they never get drawn anyway.
        for _ in 0..4 * (self.width + self.height) {
            self.dot(x, y, r, c);
            if (x, y) == b {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Binary PPM.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Option<Frame> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while bytes.get(pos)?.is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while !bytes.get(pos)?.is_ascii_whitespace() {
                pos += 1;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
        }
        pos += 1;
        let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
        if fields[0] != "P6" || fields[3] != "255" || bytes.len() != pos + w * h * 3 {
            return None;
        }
        Some(Frame { width: w, height: h, rgb: bytes[pos..].to_vec() })
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(&self.rgb).expect("in-memory PNG data");
        w.finish().expect("in-memory PNG");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
    /// Frames per second of simulated time.
    pub rate: f64,
    /// Horizontal extent of the view (m).
    pub window: f64,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Writes `frame_0000.ppm`, ... and returns the file names.
    pub fn write_ppm_dir(&self, dir: &std::path::Path) -> std::io::Result<Vec<String>> {
        self.write_dir(dir, "ppm", Frame::to_ppm)
    }

    /// Writes `frame_0000.png`, ... and returns the file names.
    pub fn write_png_dir(&self, dir: &std::path::Path) -> std::io::Result<Vec<String>> {
        self.write_dir(dir, "png", Frame::to_png)
    }

    fn write_dir(&self, dir: &std::path::Path, ext: &str, encode: fn(&Frame) -> Vec<u8>) -> std::io::Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut names = Vec::with_capacity(self.frames.len());
        for (i, f) in self.frames.iter().enumerate() {
            let name = format!("frame_{i:04}.{ext}");
            std::fs::File::create(dir.join(&name))?.write_all(&encode(f))?;
            names.push(name);
        }
        Ok(names)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub rate: f64,
    pub max_frames: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { width: 320, height: 200, rate: DEFAULT_FRAME_RATE, max_frames: MAX_FRAMES }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("cannot render an empty trajectory")]
    Empty,
    #[error("frame rate must be positive, got {0}")]
    Rate(f64),
}

const LINK: [u8; 3] = [30, 30, 30];
const JOINT: [u8; 3] = [200, 60, 40];
const GROUND: [u8; 3] = [90, 140, 60];
const TARGET: [u8; 3] = [40, 90, 220];
const OBJECT: [u8; 3] = [230, 150, 20];

/// Number of frames for `duration` seconds at `rate`, before any cap.
pub fn frame_count(duration: f64, rate: f64) -> usize {
    ((duration * rate) - 1e-9).ceil().max(1.0) as usize
}

struct Camera {
    left: f64,
    bottom: f64,
    scale: f64,
    height: usize,
}

impl Camera {
    fn to_px(&self, p: [f64; 2]) -> (i64, i64) {
        let x = (p[0] - self.left) * self.scale;
        let y = self.height as f64 - (p[1] - self.bottom) * self.scale;
        (x.round().clamp(-1e6, 1e6) as i64, y.round().clamp(-1e6, 1e6) as i64)
    }
}

fn lossy<T: Real>(p: [T; 2]) -> [f64; 2] {
    [p[0].to_f64_lossy(), p[1].to_f64_lossy()]
}

/// Draws one state. The view is `window` metres wide and centred on the root link.
pub fn render_state<T: Real>(state: &SystemState<T>, ctx: &TaskContext<T>, config: &RenderConfig, window: f64) -> Frame {
    let m: &Morphology<T> = &ctx.morphology;
    let kin = m.kinematics(state.q(), state.qdot());
    let root = lossy(m.com_position(&kin, 0));
    let scale = config.width as f64 / window;
    let view_h = config.height as f64 / scale;
    let bottom = if ctx.target.is_some() {
        root[1] - view_h / 2.0
    } else {
        ctx.terrain.height(T::lit(root[0])).to_f64_lossy() - 0.2 * view_h
    };
    let cam = Camera { left: root[0] - window / 2.0, bottom, scale, height: config.height };
    let mut frame = Frame::blank(config.width, config.height);

    if ctx.target.is_none() {
        let mut prev = None;
        for px in 0..=config.width {
            let x = cam.left + px as f64 / scale;
            let p = cam.to_px([x, ctx.terrain.height(T::lit(x)).to_f64_lossy()]);
            if let Some(q) = prev {
                frame.line(q, p, 1, GROUND);
            }
            prev = Some(p);
        }
    }
    if let Some(t) = ctx.target {
        let c = cam.to_px(lossy(t.position));
        let (s, co) = t.orientation.to_f64_lossy().sin_cos();
        frame.line((c.0 - 5, c.1), (c.0 + 5, c.1), 0, TARGET);
        frame.line((c.0, c.1 - 5), (c.0, c.1 + 5), 0, TARGET);
        let tip = (c.0 + (12.0 * co).round() as i64, c.1 - (12.0 * s).round() as i64);
        frame.line(c, tip, 0, TARGET);
    }

    for (i, link) in m.links.iter().enumerate() {
        let start = m
            .contact_points
            .iter()
            .filter(|c| c.link == i)
            .map(|c| c.at)
            .fold(T::zero(), T::min);
        let a = cam.to_px(lossy(m.point_position(&kin, i, start)));
        let b = cam.to_px(lossy(m.point_position(&kin, i, T::one())));
        frame.line(a, b, if link.parent.is_none() { 2 } else { 1 }, LINK);
    }
    for i in 0..m.links.len() {
        let p = cam.to_px(lossy(kin.proximal[i]));
        frame.dot(p.0, p.1, 2, JOINT);
    }
    if let Some(obj) = &state.object {
        let c = cam.to_px([obj.x.to_f64_lossy(), obj.y.to_f64_lossy()]);
        let (s, co) = obj.angle.to_f64_lossy().sin_cos();
        frame.dot(c.0, c.1, 3, OBJECT);
        frame.line(c, (c.0 + (10.0 * co).round() as i64, c.1 - (10.0 * s).round() as i64), 0, OBJECT);
    }
    frame
}

/// Samples the trajectory at `config.rate`, lowering the rate when the
/// sequence would exceed `config.max_frames`. Frame `k` shows the state
/// nearest to time `k / rate`.
pub fn render_frames<T: Real>(
    traj: &Trajectory<T>,
    ctx: &TaskContext<T>,
    config: &RenderConfig,
) -> Result<FrameSequence, RenderError> {
    if traj.is_empty() {
        return Err(RenderError::Empty);
    }
    if !(config.rate > 0.0) || !config.rate.is_finite() {
        return Err(RenderError::Rate(config.rate));
    }
    let dt = traj.control_dt.to_f64_lossy();
    let duration = dt * traj.len() as f64;
    let mut rate = config.rate;
    let mut n = frame_count(duration, rate);
    if n > config.max_frames {
        rate = config.max_frames as f64 / duration;
        n = config.max_frames;
    }
    let window = if ctx.target.is_some() { 1.6 } else { 3.2 };
    let frames = (0..n)
        .map(|k| {
            let i = ((k as f64 / rate) / dt).round() as usize;
            let state = if i == 0 { &traj.initial } else { &traj.steps[(i - 1).min(traj.len() - 1)].state };
            render_state(state, ctx, config, window)
        })
        .collect();
    Ok(FrameSequence { frames, rate, window })
}
