//! Depth frames to point clouds: renders a sphere in front of a wall into
//! 16-bit PGM frames, reads the directory back and stores the native
//! sequence file.

use hopc::io::depth::{load_pgm_dir, save_pgm_dir, CameraIntrinsics, DepthImage};
use hopc::io::{load_sequence, save_sequence};

fn render(width: usize, height: usize, intr: &CameraIntrinsics, centre_u: f64) -> DepthImage {
    let mut data = vec![0u32; width * height];
    for v in 0..height {
        for u in 0..width {
            let (du, dv) = (u as f64 - centre_u, v as f64 - height as f64 / 2.0);
            let r2 = du * du + dv * dv;
            let depth_m = if r2 < 400.0 { 1.5 - (400.0 - r2).sqrt() / intr.fx * 1.5 } else { 2.5 };
            if u % 17 != 0 {
                data[v * width + u] = (depth_m / intr.depth_scale).round() as u32;
            }
        }
    }
    DepthImage { width, height, data }
}

fn main() -> hopc::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hopc-depth"));
    let intr = CameraIntrinsics { fx: 285.6, fy: 285.6, cx: 80.0, cy: 60.0, depth_scale: 0.001 };
    let frames: Vec<DepthImage> = (0..8).map(|i| render(160, 120, &intr, 50.0 + 8.0 * i as f64)).collect();
    save_pgm_dir(&dir, &frames, &intr, Some(30.0))?;

    let seq = load_pgm_dir(&dir)?;
    for (img, f) in frames.iter().zip(seq.frames()) {
        let valid = img.data.iter().filter(|&&d| d > 0).count();
        let zmin = f.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        println!("frame {}: {} points ({valid} valid pixels), nearest z {zmin:.3}", f.index, f.points.len());
    }

    let path = dir.join("sphere.hpc");
    save_sequence(&seq, &path)?;
    assert_eq!(load_sequence(&path)?, seq);
    println!("{} frames at {} fps stored in {}", seq.n_frames(), seq.frame_rate, path.display());
    Ok(())
}
