//! End-to-end comparison: synthesize noisy data on a fine mesh, invert with
//! the bi-level and the direct iteration, and write histories, meshes and
//! reconstructions to disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{Field, Support};
use crate::geometry::GeometrySpec;
use crate::inversion::{add_noise, run_bilevel, run_direct, History, InverseProblem, InversionConfig, Reconstruction};
use crate::mesh::{generate_mesh, Mesh};
use crate::operators::{DiscreteOperatorPair, SourceMap};
use crate::scalar::Real;

pub const BILEVEL_MESH_ID: u64 = 0;
pub const DIRECT_MESH_ID: u64 = 100;
pub const DATA_MESH_ID: u64 = 200;

/// Radial test source `sqrt(max(1/4 - r², 0)) · cos(2πr)`, supported on the
/// disc of radius 1/2.
pub fn true_source<T: Real>(x: T, y: T) -> T {
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    (T::lit(0.25) - r2).max(T::zero()).sqrt() * (T::TAU() * r).cos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub geometry: GeometrySpec<T>,
    pub inversion: InversionConfig<T>,
    /// Mesh on which the synthetic data are generated.
    pub data_mesh_h: T,
    /// Fixed mesh of the direct iteration.
    pub direct_mesh_h: T,
    pub out_dir: Option<PathBuf>,
    pub emit_fields: bool,
    /// Run both inversions concurrently; timings are then less comparable.
    pub parallel: bool,
}

impl<T: Real> Default for ExperimentConfig<T> {
    fn default() -> Self {
        ExperimentConfig {
            geometry: GeometrySpec::default(),
            inversion: InversionConfig::default(),
            data_mesh_h: T::lit(0.046),
            direct_mesh_h: T::lit(0.064),
            out_dir: None,
            emit_fields: false,
            parallel: false,
        }
    }
}

impl<T: Real> ExperimentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.inversion.validate()?;
        for (name, h) in [("data_mesh_h", self.data_mesh_h), ("direct_mesh_h", self.direct_mesh_h)] {
            if !(h > T::zero()) {
                return Err(Error::Config(format!("{name} must be positive, got {h}")));
            }
        }
        let h0 = self.inversion.h0;
        if !(self.data_mesh_h < self.direct_mesh_h && self.direct_mesh_h < h0) {
            return Err(Error::Config(format!(
                "mesh sizes must satisfy data_mesh_h < direct_mesh_h < h0, got {} / {} / {h0}",
                self.data_mesh_h, self.direct_mesh_h
            )));
        }
        Ok(())
    }
}

/// Noise-free data `u = Fφ†` on the data mesh.
pub struct CleanData<T> {
    pub mesh: Mesh<T>,
    pub op: DiscreteOperatorPair<T>,
    pub source: Field<T>,
    pub data: Field<T>,
}

pub fn clean_data<T: Real>(geometry: &GeometrySpec<T>, data_mesh_h: T) -> Result<CleanData<T>> {
    let mesh = generate_mesh(geometry, data_mesh_h)?.with_id(DATA_MESH_ID);
    let op = DiscreteOperatorPair::new(&mesh, geometry.wave_number)?;
    let source = Field::from_fn(&mesh, Support::Source, |x, y| Complex::new(true_source(x, y), T::zero()));
    let data = op.forward(&source)?;
    Ok(CleanData { mesh, op, source, data })
}

/// Builds the inverse problem from the reference source at relative noise
/// `noise_level` (noise-free when zero).
pub fn synthesize_data<T: Real>(
    geometry: &GeometrySpec<T>,
    data_mesh_h: T,
    noise_level: T,
    seed: u64,
) -> Result<InverseProblem<T>> {
    let clean = clean_data(geometry, data_mesh_h)?;
    let (data, delta) = if noise_level > T::zero() {
        add_noise(clean.op.space(), &clean.data, noise_level, seed)?
    } else {
        (clean.data, T::zero())
    };
    Ok(InverseProblem {
        wave_number: geometry.wave_number,
        data_mesh: clean.mesh,
        data,
        delta,
        truth: Some(Arc::new(true_source::<T>)),
    })
}

pub struct ExperimentResult<T> {
    pub problem: InverseProblem<T>,
    pub bilevel: Reconstruction<T>,
    pub direct: Reconstruction<T>,
}

pub fn run_experiment<T: Real>(config: &ExperimentConfig<T>) -> Result<ExperimentResult<T>> {
    config.validate()?;
    let inv = &config.inversion;
    let problem = synthesize_data(&config.geometry, config.data_mesh_h, inv.noise_level, inv.seed)?;
    let coarse = generate_mesh(&config.geometry, inv.h0)?.with_id(BILEVEL_MESH_ID);
    let fine = generate_mesh(&config.geometry, config.direct_mesh_h)?.with_id(DIRECT_MESH_ID);

    let (bilevel, direct) = if config.parallel {
        std::thread::scope(|s| {
            let b = s.spawn(|| run_bilevel(&problem, inv, coarse));
            let d = run_direct(&problem, inv, fine);
            (b.join().expect("bi-level worker panicked"), d)
        })
    } else {
        (run_bilevel(&problem, inv, coarse), run_direct(&problem, inv, fine))
    };
    let result = ExperimentResult { problem, bilevel: bilevel?, direct: direct? };
    if let Some(dir) = &config.out_dir {
        write_outputs(dir, config, &result)?;
    }
    Ok(result)
}

pub fn write_history<W: Write>(history: &History, mut w: W) -> Result<()> {
    writeln!(w, "j,residual,error,t_total,t_refine,t_step,t_residual,mesh_id,h")?;
    for r in &history.records {
        writeln!(
            w,
            "{},{:e},{:e},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.j,
            r.residual,
            r.error,
            r.times.total(),
            r.times.refine,
            r.times.step,
            r.times.residual,
            r.mesh_id,
            r.h
        )?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_mesh<T: Real>(dir: &Path, mesh: &Mesh<T>) -> Result<()> {
    let mut w = create(dir, &format!("mesh_{}.txt", mesh.id()))?;
    mesh.write_dump(&mut w)?;
    Ok(w.flush()?)
}

/// Field dump: the mesh dump followed by `values N` and `vertex_index re im`
/// lines.
pub fn write_field_dump<T: Real, W: Write>(mesh: &Mesh<T>, field: &Field<T>, mut w: W) -> Result<()> {
    field.ensure_on(mesh)?;
    mesh.write_dump(&mut w)?;
    writeln!(w, "values {}", field.len())?;
    field.write_values(&mut w)
}

fn write_field<T: Real>(dir: &Path, name: &str, mesh: &Mesh<T>, field: &Field<T>) -> Result<()> {
    let mut w = create(dir, &format!("field_{name}_{}.txt", field.mesh_id()))?;
    write_field_dump(mesh, field, &mut w)?;
    Ok(w.flush()?)
}

/// `|φ - φ†|` on the mesh of `phi`, as a real field.
fn error_field<T: Real>(mesh: &Mesh<T>, phi: &Field<T>) -> Result<Field<T>> {
    let truth = Field::from_fn(mesh, Support::Source, |x, y| Complex::new(true_source(x, y), T::zero()));
    let diff = phi.axpy(-T::one(), &truth)?;
    let abs: Vec<T> = diff.values().iter().map(|v| v.norm()).collect();
    Field::from_real(mesh, &abs, Support::Source)
}

fn summarize<W: Write>(mut w: W, label: &str, h: &History) -> Result<()> {
    let sizes: Vec<String> = h.mesh_sizes().iter().map(|s| format!("{s}")).collect();
    writeln!(w, "[{label}]")?;
    writeln!(w, "stop_reason = {}", h.stop_reason)?;
    writeln!(w, "iterations = {}", h.iterations())?;
    writeln!(w, "refinement_count = {}", h.refinements.len())?;
    for e in &h.refinements {
        writeln!(w, "refinement = j {} h {} -> {} ({} vertices)", e.j, e.old_h, e.new_h, e.vertices)?;
    }
    writeln!(w, "mesh_sizes = {}", sizes.join(" "))?;
    writeln!(w, "mu = {:e}", h.mu)?;
    writeln!(w, "final_residual = {:e}", h.final_residual())?;
    writeln!(w, "final_error = {:e}", h.final_error())?;
    writeln!(w, "total_time = {:.6}", h.total_time())?;
    writeln!(w)?;
    Ok(())
}

pub fn write_outputs<T: Real>(dir: &Path, config: &ExperimentConfig<T>, result: &ExperimentResult<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = create(dir, "bilevel.csv")?;
    write_history(&result.bilevel.history, &mut w)?;
    w.flush()?;
    let mut w = create(dir, "direct.csv")?;
    write_history(&result.direct.history, &mut w)?;
    w.flush()?;

    let mut w = create(dir, "summary.txt")?;
    writeln!(w, "noise_level = {}", config.inversion.noise_level)?;
    writeln!(w, "delta = {:e}", result.problem.delta.to_f64_lossy())?;
    writeln!(w, "tau = {}", config.inversion.tau)?;
    writeln!(w, "data_mesh_vertices = {}", result.problem.data_mesh.num_vertices())?;
    writeln!(w)?;
    summarize(&mut w, "bilevel", &result.bilevel.history)?;
    summarize(&mut w, "direct", &result.direct.history)?;
    w.flush()?;

    if config.emit_fields {
        let p = &result.problem;
        write_mesh(dir, &p.data_mesh)?;
        write_field(dir, "data", &p.data_mesh, &p.data)?;
        for (name, rec) in [("bilevel", &result.bilevel), ("direct", &result.direct)] {
            for level in &rec.levels {
                write_mesh(dir, &level.mesh)?;
                write_field(dir, name, &level.mesh, &level.source)?;
            }
            let last = rec.final_level();
            write_field(dir, &format!("{name}_error"), &last.mesh, &error_field(&last.mesh, &last.source)?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_source_values() {
        assert!((true_source(0.0f64, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(true_source(0.5f64, 0.0), 0.0);
        assert_eq!(true_source(0.4f64, 0.4), 0.0);
        let r = 0.25f64;
        let expect = (0.25 - r * r).sqrt() * (2.0 * std::f64::consts::PI * r).cos();
        assert!((true_source(0.0, r) - expect).abs() < 1e-15);
        assert!(true_source(0.0f64, 0.25).abs() < 1e-15);
    }

    #[test]
    fn history_csv_layout() {
        let data = synthesize_data(&GeometrySpec::<f64>::default(), 0.3, 0.1, 5).unwrap();
        let mesh = generate_mesh(&GeometrySpec::default(), 0.531).unwrap();
        let cfg = InversionConfig { j_max: 3, ..InversionConfig::default() };
        let rec = run_direct(&data, &cfg, mesh).unwrap();
        let mut buf = Vec::new();
        write_history(&rec.history, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "j,residual,error,t_total,t_refine,t_step,t_residual,mesh_id,h");
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), rec.history.records.len());
        for row in rows {
            assert_eq!(row.split(',').count(), 9);
        }
    }
}
