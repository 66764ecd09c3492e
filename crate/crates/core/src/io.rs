//! Snapshots, CSV output and run directories.
//!
//! Snapshot record (all little endian):
//!
//! ```text
//! magic "PEMF" | version u32 | nx u32 | ny u32 | np u32 | staggering u32 | t f64 | len u64 | len x f64
//! ```
//!
//! `nx, ny, np` are the grid sizes; the data length follows from the
//! staggering. A state file holds the records `v1, v2, T, q` in that order.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{inner, ScalarField, State, VectorField2};
use crate::grid::{Grid, Staggering};
use crate::operators::diagnostics::constraint_residual;
use crate::params::{save_params, SimParams};
use crate::stepper::{run, Model, Observer, StepInfo};

pub const MAGIC: [u8; 4] = *b"PEMF";
pub const VERSION: u32 = 1;
/// Overrides the default output directory.
pub const OUT_DIR_ENV: &str = "PEMOIST_OUT_DIR";

/// `$PEMOIST_OUT_DIR` if set, else `./out`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

pub fn encode_field(field: &ScalarField, grid: &Grid, t: f64, out: &mut Vec<u8>) -> Result<()> {
    field.check(grid)?;
    out.extend_from_slice(&MAGIC);
    for v in [VERSION, grid.nx as u32, grid.ny as u32, grid.np as u32, field.stag.tag()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&(field.len() as u64).to_le_bytes());
    for x in &field.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse(format!("snapshot truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode_field(cur: &mut Cursor<'_>, grid: &Grid) -> Result<(ScalarField, f64)> {
    if cur.take(4)? != MAGIC {
        return Err(Error::Parse("bad snapshot magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported snapshot version {version}")));
    }
    let (nx, ny, np) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
    if (nx, ny, np) != (grid.nx, grid.ny, grid.np) {
        return Err(Error::GridMismatch(format!(
            "snapshot grid {nx}x{ny}x{np}, expected {}x{}x{}",
            grid.nx, grid.ny, grid.np
        )));
    }
    let tag = cur.u32()?;
    let stag = Staggering::from_tag(tag).ok_or_else(|| Error::Parse(format!("unknown staggering tag {tag}")))?;
    let t = cur.f64()?;
    let len = cur.u64()? as usize;
    let data = (0..len).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    Ok((ScalarField::from_vec(grid, stag, data)?, t))
}

pub fn write_field(path: impl AsRef<Path>, field: &ScalarField, grid: &Grid, t: f64) -> Result<()> {
    let mut buf = Vec::new();
    encode_field(field, grid, t, &mut buf)?;
    fs::write(path.as_ref(), buf).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_field(path: impl AsRef<Path>, grid: &Grid) -> Result<(ScalarField, f64)> {
    let buf = fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    decode_field(&mut Cursor { buf: &buf, pos: 0 }, grid)
}

pub fn write_state(path: impl AsRef<Path>, state: &State, grid: &Grid) -> Result<()> {
    let mut buf = Vec::new();
    for f in [&state.v.u, &state.v.v, &state.temp, &state.q] {
        encode_field(f, grid, state.t, &mut buf)?;
    }
    let p = path.as_ref();
    let mut file = File::create(p).map_err(|e| Error::io(p, e))?;
    file.write_all(&buf).map_err(|e| Error::io(p, e))
}

pub fn read_state(path: impl AsRef<Path>, grid: &Grid) -> Result<State> {
    let p = path.as_ref();
    let mut buf = Vec::new();
    File::open(p).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| Error::io(p, e))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    let (u, t) = decode_field(&mut cur, grid)?;
    let (v, _) = decode_field(&mut cur, grid)?;
    let (temp, _) = decode_field(&mut cur, grid)?;
    let (q, _) = decode_field(&mut cur, grid)?;
    let state = State { t, v: VectorField2 { u, v }, temp, q };
    state.check(grid)?;
    Ok(state)
}

/// `i,j,k,x,y,p,value` rows of one field.
pub fn field_to_csv(field: &ScalarField, grid: &Grid) -> Result<String> {
    field.check(grid)?;
    let mut s = String::from("i,j,k,x,y,p,value\n");
    let [n0, n1, n2] = field.shape;
    for k in 0..n2 {
        for j in 0..n1 {
            for i in 0..n0 {
                let _ = writeln!(
                    s,
                    "{i},{j},{k},{:.9e},{:.9e},{:.9e},{:.17e}",
                    crate::field::point_x(grid, field.stag, i),
                    crate::field::point_y(grid, field.stag, j),
                    crate::field::point_p(grid, field.stag, k),
                    field.get(i, j, k)
                );
            }
        }
    }
    Ok(s)
}

/// Columns of `diagnostics.csv`, with their meaning.
pub const DIAGNOSTIC_COLUMNS: [(&str, &str); 14] = [
    ("step", "step index (0 = initial state)"),
    ("t", "model time [s]"),
    ("v_sq", "|v|^2, squared L2 norm of the horizontal velocity"),
    ("T_sq", "|T|^2"),
    ("q_sq", "|q|^2"),
    ("min_T", "minimum temperature [K]"),
    ("max_T", "maximum temperature [K]"),
    ("min_q", "minimum specific humidity"),
    ("max_q", "maximum specific humidity"),
    ("max_abs_v", "largest velocity component [m/s]"),
    ("max_D_eps", "largest |D_eps| in the tendencies that produced this state"),
    ("constraint", "L2 norm of the vertically integrated divergence"),
    ("max_abs_phi_s", "largest |Phi_s| recovered by the projection"),
    ("cfl_limit", "advective dt limit of the previous state [s]"),
];

fn diagnostics_header() -> String {
    let names: Vec<&str> = DIAGNOSTIC_COLUMNS.iter().map(|c| c.0).collect();
    names.join(",") + "\n"
}

fn diagnostics_row(step: usize, state: &State, info: Option<&StepInfo>, grid: &Grid) -> Result<String> {
    let (d, phi, cfl) = match info {
        Some(i) => (i.tendencies.d_eps.max_abs(), i.phi_s.max_abs(), i.cfl_limit),
        None => (0.0, 0.0, f64::NAN),
    };
    Ok(format!(
        "{step},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
        state.t,
        inner(&state.v, &state.v, grid)?,
        inner(&state.temp, &state.temp, grid)?,
        inner(&state.q, &state.q, grid)?,
        state.temp.min(),
        state.temp.max(),
        state.q.min(),
        state.q.max(),
        state.v.max_abs(),
        d,
        constraint_residual(&state.v, grid)?,
        phi,
        cfl,
    ))
}

/// Observer writing `diagnostics.csv` and `snapshots/NNNNNN.fld` into a run
/// directory, flushing after every row so a failed run keeps its output.
pub struct RunWriter {
    dir: PathBuf,
    diag: BufWriter<File>,
    diag_every: usize,
    snapshot_every: usize,
    pub rows: usize,
    pub snapshots: usize,
}

impl RunWriter {
    pub fn create(dir: impl AsRef<Path>, diag_every: usize, snapshot_every: usize) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let snaps = dir.join("snapshots");
        fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
        let path = dir.join("diagnostics.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut diag = BufWriter::new(file);
        diag.write_all(diagnostics_header().as_bytes()).map_err(|e| Error::io(&path, e))?;
        Ok(Self { dir, diag, diag_every: diag_every.max(1), snapshot_every, rows: 0, snapshots: 0 })
    }

    fn write_row(&mut self, row: String) -> Result<()> {
        let path = self.dir.join("diagnostics.csv");
        self.diag.write_all(row.as_bytes()).map_err(|e| Error::io(&path, e))?;
        self.diag.flush().map_err(|e| Error::io(&path, e))?;
        self.rows += 1;
        Ok(())
    }

    fn snapshot(&mut self, step: usize, state: &State, grid: &Grid) -> Result<()> {
        write_state(self.dir.join("snapshots").join(format!("{step:06}.fld")), state, grid)?;
        self.snapshots += 1;
        Ok(())
    }
}

impl Observer for RunWriter {
    fn start(&mut self, state: &State, model: &Model) -> Result<()> {
        self.write_row(diagnostics_row(0, state, None, &model.grid)?)?;
        if self.snapshot_every > 0 {
            self.snapshot(0, state, &model.grid)?;
        }
        Ok(())
    }

    fn observe(&mut self, step: usize, state: &State, info: &StepInfo, model: &Model) -> Result<()> {
        if step % self.diag_every == 0 {
            self.write_row(diagnostics_row(step, state, Some(info), &model.grid)?)?;
        }
        if self.snapshot_every > 0 && step % self.snapshot_every == 0 {
            self.snapshot(step, state, &model.grid)?;
        }
        Ok(())
    }

    fn finish(&mut self, _state: &State, _model: &Model, _failed: bool) -> Result<()> {
        let path = self.dir.join("diagnostics.csv");
        self.diag.flush().map_err(|e| Error::io(&path, e))
    }
}

/// Text written to `report.txt` after a run.
pub fn run_report(params: &SimParams, scenario: &str, outcome: &Result<State>, rows: usize, snapshots: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {scenario}");
    let _ = writeln!(s, "grid: {}x{}x{}, dt {} s, t1 {} s, epsilon {}", params.nx, params.ny, params.np, params.dt, params.t1, params.epsilon);
    match outcome {
        Ok(st) => {
            let _ = writeln!(s, "status: completed at t = {}", st.t);
        }
        Err(e) => {
            let _ = writeln!(s, "status: failed: {e}");
        }
    }
    let _ = writeln!(s, "diagnostic rows: {rows}, snapshots: {snapshots}");
    let _ = writeln!(s, "\ndiagnostics.csv columns:");
    for (name, what) in DIAGNOSTIC_COLUMNS {
        let _ = writeln!(s, "  {name}: {what}");
    }
    s
}

/// Runs `initial` and writes `params.cfg`, `diagnostics.csv`, `snapshots/` and
/// `report.txt` under `dir`. Output written before a failure is kept.
pub fn run_to_dir(model: &Model, initial: &State, scenario: &str, dir: impl AsRef<Path>) -> Result<State> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_params(&model.params, dir.join("params.cfg"))?;
    let p = &model.params;
    let mut writer = RunWriter::create(dir, p.output.diag_every, p.output.snapshot_every)?;
    let outcome = run(initial, model, &mut [&mut writer]);
    let report = run_report(p, scenario, &outcome, writer.rows, writer.snapshots);
    let path = dir.join("report.txt");
    fs::write(&path, report).map_err(|e| Error::io(&path, e))?;
    outcome
}
