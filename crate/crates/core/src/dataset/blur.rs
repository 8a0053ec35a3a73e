use super::LoadFrame;

const TAPS: [f64; 3] = [0.25, 0.5, 0.25];

/// Target index of tap `d` (0, 1, 2) around `i`; taps past an edge fold
/// back onto the edge cell.
fn fold(i: usize, d: usize, n: usize) -> usize {
    (i + d).saturating_sub(1).min(n - 1)
}

/// 3x3 binomial blur in scatter form: every cell spreads its value over its
/// neighbours with weights (1,2,1)x(1,2,1)/16, and weight that would leave
/// the grid is folded back onto the edge cell. Each source keeps its full
/// weight, so the total is conserved; the operator is also symmetric, so
/// constants stay constant and the maximum cannot grow.
pub fn gaussian_blur3(frame: &LoadFrame) -> LoadFrame {
    let (h, w) = (frame.h, frame.w);
    let mut out = vec![0.0f64; h * w];
    for i in 0..h {
        for j in 0..w {
            let v = frame.data[i * w + j] as f64;
            if v == 0.0 {
                continue;
            }
            for (di, ti) in TAPS.iter().enumerate() {
                let row = fold(i, di, h) * w;
                for (dj, tj) in TAPS.iter().enumerate() {
                    out[row + fold(j, dj, w)] += v * ti * tj;
                }
            }
        }
    }
    LoadFrame { h, w, data: out.into_iter().map(|v| v as f32).collect() }
}
