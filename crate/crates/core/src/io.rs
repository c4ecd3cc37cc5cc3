//! CSV and JSON persistence for profiles, measures, spectral functions and
//! Krein solutions. Floats are written in shortest round-trip form, so a
//! reload reproduces every value bit for bit.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficient::{Coefficient, Shape};
use crate::error::{Error, Result};
use crate::grid::{PointMass, RadialGrid, SampledProfile, SpectralGrid, SpectralMeasure};
use crate::krein::{integrate_krein, KreinSolution};
use crate::transforms::SpectralFunction;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if !header.is_empty() && found != header {
        return Err(Error::Parse(format!("{}: expected header {:?}, found {:?}", path.display(), header, found)));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<Vec<f64>>() {
        rows.push(rec?);
    }
    Ok(rows)
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileMeta {
    grid: RadialGrid,
    declared_support: Option<f64>,
}

/// Writes `r,value_re,value_im` to `path` and the grid to a `.json` sidecar.
pub fn write_profile(path: &Path, p: &SampledProfile) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["r", "value_re", "value_im"])?;
    for (r, v) in p.grid().nodes().zip(p.values()) {
        w.serialize((r, v.re, v.im))?;
    }
    w.flush()?;
    write_json(&sidecar(path), &ProfileMeta { grid: *p.grid(), declared_support: p.declared_support() })
}

pub fn read_profile(path: &Path) -> Result<SampledProfile> {
    let meta: ProfileMeta = read_json(&sidecar(path))?;
    let rows = read_rows(path, &["r", "value_re", "value_im"])?;
    let values = rows
        .iter()
        .map(|row| match row.as_slice() {
            [_, re, im] => Ok(Complex64::new(*re, *im)),
            _ => Err(Error::Parse(format!("{}: expected 3 columns per row", path.display()))),
        })
        .collect::<Result<Vec<_>>>()?;
    SampledProfile::new(meta.grid, values, meta.declared_support)
}

/// Reads a two- or three-column `r,value_re[,value_im]` file with uniform
/// spacing starting at 0 and no sidecar.
pub fn read_profile_samples(path: &Path) -> Result<SampledProfile> {
    let rows = read_rows(path, &[])?;
    if rows.len() < 3 {
        return Err(Error::Parse(format!("{}: need at least three samples", path.display())));
    }
    let step = rows[1][0] - rows[0][0];
    if rows[0][0] != 0.0 || !(step > 0.0) {
        return Err(Error::Parse(format!("{}: samples must start at r = 0 with increasing r", path.display())));
    }
    let mut values = Vec::with_capacity(rows.len());
    for (j, row) in rows.iter().enumerate() {
        if ((row[0] - j as f64 * step) / step).abs() > 1e-6 {
            return Err(Error::Parse(format!("{}: row {} breaks the uniform spacing", path.display(), j + 2)));
        }
        values.push(match row.as_slice() {
            [_, re] => Complex64::new(*re, 0.0),
            [_, re, im] => Complex64::new(*re, *im),
            _ => return Err(Error::Parse(format!("{}: expected 2 or 3 columns", path.display()))),
        });
    }
    SampledProfile::new(RadialGrid::new(step, values.len() - 1)?, values, None)
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureMeta {
    grid: SpectralGrid,
    masses: Vec<PointMass>,
}

/// Writes `k,density` and a sidecar `{"grid": …, "masses": [{"k", "w"}]}`.
pub fn write_measure(path: &Path, m: &SpectralMeasure) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "density"])?;
    for (k, d) in m.grid().nodes().zip(m.density()) {
        w.serialize((k, *d))?;
    }
    w.flush()?;
    write_json(&sidecar(path), &MeasureMeta { grid: *m.grid(), masses: m.point_masses().to_vec() })
}

pub fn read_measure(path: &Path) -> Result<SpectralMeasure> {
    let meta: MeasureMeta = read_json(&sidecar(path))?;
    let rows = read_rows(path, &["k", "density"])?;
    let density = rows.iter().map(|r| r.get(1).copied().unwrap_or(f64::NAN)).collect();
    SpectralMeasure::new(meta.grid, density, meta.masses)
}

/// Writes `k,re,im`.
pub fn write_spectral(path: &Path, f: &SpectralFunction) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "re", "im"])?;
    for (k, v) in f.grid().nodes().zip(f.values()) {
        w.serialize((k, v.re, v.im))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `k,re,im` onto a known grid.
pub fn read_spectral(path: &Path, grid: SpectralGrid) -> Result<SpectralFunction> {
    let rows = read_rows(path, &["k", "re", "im"])?;
    let values = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    SpectralFunction::new(grid, values)
}

/// Writes `k,value` for a real function on a spectral grid.
pub fn write_spectral_real(path: &Path, grid: &SpectralGrid, values: &[f64], column: &str) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", column])?;
    for (k, v) in grid.nodes().zip(values) {
        w.serialize((k, *v))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionMeta {
    r_grid: RadialGrid,
    k_grid: SpectralGrid,
    coefficient: Shape,
    coefficient_hash: String,
    osc_factor: f64,
}

fn write_matrix(path: &Path, sol: &KreinSolution, entry: impl Fn(usize, usize) -> Complex64) -> Result<()> {
    let mut w = writer(path)?;
    let nk = sol.k_grid().len();
    let mut header = Vec::with_capacity(1 + 2 * nk);
    header.push("r".to_owned());
    for i in 0..nk {
        header.push(format!("re_{i}"));
        header.push(format!("im_{i}"));
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(1 + 2 * nk);
    for j in 0..sol.r_grid().len() {
        row.clear();
        row.push(sol.r_grid().node(j));
        for i in 0..nk {
            let v = entry(j, i);
            row.push(v.re);
            row.push(v.im);
        }
        w.serialize(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix(path: &Path, r_grid: &RadialGrid, k_grid: &SpectralGrid) -> Result<Vec<Complex64>> {
    let rows = read_rows(path, &[])?;
    let (nr, nk) = (r_grid.len(), k_grid.len());
    if rows.len() != nr || rows.iter().any(|r| r.len() != 1 + 2 * nk) {
        return Err(Error::Parse(format!("{}: expected {nr} rows of {} columns", path.display(), 1 + 2 * nk)));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); nr * nk];
    for (j, row) in rows.iter().enumerate() {
        for i in 0..nk {
            out[i * nr + j] = Complex64::new(row[1 + 2 * i], row[2 + 2 * i]);
        }
    }
    Ok(out)
}

/// Writes `meta.json`, `P.csv` and `Pstar.csv` into `dir`.
pub fn write_solution(dir: &Path, sol: &KreinSolution) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join("P.csv"), sol, |j, i| sol.p(j, i))?;
    write_matrix(&dir.join("Pstar.csv"), sol, |j, i| sol.p_star(j, i))?;
    let meta = SolutionMeta {
        r_grid: *sol.r_grid(),
        k_grid: *sol.k_grid(),
        coefficient: sol.coefficient().shape().clone(),
        coefficient_hash: sol.coefficient().hash(),
        osc_factor: sol.osc_factor(),
    };
    // meta last: its presence marks a complete entry
    write_json(&dir.join("meta.json"), &meta)
}

pub fn read_solution(dir: &Path) -> Result<KreinSolution> {
    let meta: SolutionMeta = read_json(&dir.join("meta.json"))?;
    let coefficient = Coefficient::new(meta.coefficient, meta.r_grid)?;
    if coefficient.hash() != meta.coefficient_hash {
        return Err(Error::Parse(format!("{}: coefficient hash mismatch", dir.display())));
    }
    let p = read_matrix(&dir.join("P.csv"), &meta.r_grid, &meta.k_grid)?;
    let p_star = read_matrix(&dir.join("Pstar.csv"), &meta.r_grid, &meta.k_grid)?;
    KreinSolution::from_parts(meta.r_grid, meta.k_grid, p, p_star, coefficient, meta.osc_factor)
}

/// Cache key for a solve: coefficient hash, grids and solver setting.
pub fn solution_key(a: &Coefficient, r_grid: &RadialGrid, k_grid: &SpectralGrid, osc_factor: f64) -> String {
    use sha2::{Digest, Sha256};
    let text = format!(
        "{}|{:e}|{}|{:e}|{}|{:e}",
        a.hash(),
        r_grid.step(),
        r_grid.count(),
        k_grid.step(),
        k_grid.half_count(),
        osc_factor
    );
    Sha256::digest(text.as_bytes()).iter().take(12).map(|b| format!("{b:02x}")).collect()
}

/// Where a solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheStatus {
    Hit,
    Stored,
    Disabled,
}

/// Integrates the Krein system, or reloads it from `cache/<key>` when present.
pub fn solve_cached(
    a: &Coefficient,
    r_grid: RadialGrid,
    k_grid: SpectralGrid,
    osc_factor: f64,
    cache: Option<&Path>,
) -> Result<(KreinSolution, CacheStatus)> {
    let Some(root) = cache else {
        return Ok((integrate_krein(a, r_grid, k_grid, osc_factor)?, CacheStatus::Disabled));
    };
    let dir = root.join(solution_key(a, &r_grid, &k_grid, osc_factor));
    if dir.join("meta.json").exists() {
        return Ok((read_solution(&dir)?, CacheStatus::Hit));
    }
    let sol = integrate_krein(a, r_grid, k_grid, osc_factor)?;
    write_solution(&dir, &sol)?;
    Ok((sol, CacheStatus::Stored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::DEFAULT_OSC_FACTOR;

    #[test]
    fn profile_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let g = RadialGrid::new(0.1, 50).unwrap();
        let p = SampledProfile::from_fn(g, Some(3.0), |r| {
            if r > 3.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new((1.0 / 3.0) * r.sin(), 1e-300 * r)
            }
        });
        write_profile(&path, &p).unwrap();
        assert_eq!(read_profile(&path).unwrap(), p);
        let head = fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("r,value_re,value_im\n"));
    }

    #[test]
    fn bare_samples_load_as_profile() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        fs::write(&path, "r,value\n0,0.5\n0.25,0.25\n0.5,0\n").unwrap();
        let p = read_profile_samples(&path).unwrap();
        assert_eq!(p.grid().step(), 0.25);
        assert_eq!(p.values()[1], Complex64::new(0.25, 0.0));
        fs::write(&path, "r,value\n0,0.5\n0.25,0.25\n0.7,0\n").unwrap();
        assert!(read_profile_samples(&path).is_err());
    }

    #[test]
    fn measure_and_spectral_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = SpectralGrid::new(2.0, 0.1).unwrap();
        let m = SpectralMeasure::new(
            g,
            g.nodes().map(|k| 1.0 / (2.0 + k.cos())).collect(),
            vec![PointMass { location: 0.3, weight: 0.25 }],
        )
        .unwrap();
        let path = dir.path().join("m.csv");
        write_measure(&path, &m).unwrap();
        assert_eq!(read_measure(&path).unwrap(), m);
        let json = fs::read_to_string(dir.path().join("m.json")).unwrap();
        assert!(json.contains("\"masses\"") && json.contains("\"k\": 0.3") && json.contains("\"w\": 0.25"));

        let f = SpectralFunction::new(g, g.nodes().map(|k| Complex64::new(k.sin(), k * k / 7.0)).collect()).unwrap();
        let path = dir.path().join("F.csv");
        write_spectral(&path, &f).unwrap();
        assert_eq!(read_spectral(&path, g).unwrap(), f);
    }

    #[test]
    fn cached_solution_reloads_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let rg = RadialGrid::with_extent(0.05, 4.0).unwrap();
        let kg = SpectralGrid::new(3.0, 0.5).unwrap();
        let a = Coefficient::gaussian(0.3, 2.0, 1.0, rg).unwrap();
        let (fresh, s1) = solve_cached(&a, rg, kg, DEFAULT_OSC_FACTOR, Some(dir.path())).unwrap();
        let (cached, s2) = solve_cached(&a, rg, kg, DEFAULT_OSC_FACTOR, Some(dir.path())).unwrap();
        assert_eq!((s1, s2), (CacheStatus::Stored, CacheStatus::Hit));
        assert_eq!(fresh, cached);
        let other = solution_key(&a, &rg, &kg, 0.05);
        assert_ne!(other, solution_key(&a, &rg, &kg, DEFAULT_OSC_FACTOR));
    }
}
