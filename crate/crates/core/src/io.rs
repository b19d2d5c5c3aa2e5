//! Point cloud, mesh, weights and report files.
//!
//! Coordinates are written with 9 significant digits. Manifests and reports
//! are `key=value` lines after a versioned header line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, TriangleMesh};
use crate::score::{read_weights, write_weights, NetworkWeights};

pub const MANIFEST_HEADER: &str = "# pcdenoise manifest v1";
pub const REPORT_HEADER: &str = "# pcdenoise report v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    Xyz,
    Ply,
}

impl PointFormat {
    /// From the file extension; anything other than `.ply` is read as XYZ.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => PointFormat::Ply,
            _ => PointFormat::Xyz,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_coords(path: &Path, line: usize, fields: &[&str]) -> Result<Point3> {
    let mut c = [0.0f64; 3];
    for (slot, f) in c.iter_mut().zip(fields) {
        *slot = f
            .parse()
            .map_err(|_| parse_err(path, line, format!("'{f}' is not a number")))?;
    }
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            path: path.to_path_buf(),
            line,
        });
    }
    Ok(Point3::new(c[0], c[1], c[2]))
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    read_point_cloud_as(path, PointFormat::from_path(path))
}

pub fn read_point_cloud_as(path: &Path, format: PointFormat) -> Result<PointCloud> {
    let reader = open(path)?;
    let points = match format {
        PointFormat::Xyz => parse_xyz(path, reader)?,
        PointFormat::Ply => parse_ply(path, reader)?,
    };
    if points.is_empty() {
        return Err(parse_err(path, 0, "no points"));
    }
    PointCloud::new(points)
}

/// One point per line, three whitespace-separated numbers. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_xyz(path: &Path, reader: impl BufRead) -> Result<Vec<Point3>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(path, i + 1, format!("expected 3 values, found {}", fields.len())));
        }
        out.push(parse_coords(path, i + 1, &fields)?);
    }
    Ok(out)
}

/// ASCII PLY whose vertex element has exactly `x y z` as float or double.
/// Elements other than `vertex` are skipped.
pub fn parse_ply(path: &Path, reader: impl BufRead) -> Result<Vec<Point3>> {
    let mut lines = reader.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l.map_err(|e| Error::io(path, e))?)),
            None => Err(parse_err(path, 0, format!("unexpected end of file, expected {what}"))),
        }
    };
    let (_, magic) = next("'ply'")?;
    if magic.trim() != "ply" {
        return Err(parse_err(path, 1, "missing 'ply' magic"));
    }
    // (name, count, vertex props)
    let mut elements: Vec<(String, usize)> = Vec::new();
    let mut vertex_props: Vec<(String, String)> = Vec::new();
    let mut in_vertex = false;
    loop {
        let (ln, line) = next("end_header")?;
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => {}
            ["format", other, _] => return Err(parse_err(path, ln, format!("unsupported PLY format '{other}'"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(path, ln, format!("bad element count '{count}'")))?;
                in_vertex = *name == "vertex";
                elements.push((name.to_string(), count));
            }
            ["property", "list", ..] if in_vertex => {
                vertex_props.push((f[f.len() - 1].to_string(), "list".into()));
            }
            ["property", ty, name] if in_vertex => vertex_props.push((name.to_string(), ty.to_string())),
            ["property", ..] => {}
            _ => return Err(parse_err(path, ln, format!("unrecognized header line '{line}'"))),
        }
    }
    let float = |t: &str| matches!(t, "float" | "double" | "float32" | "float64");
    let ok = vertex_props.len() == 3
        && vertex_props.iter().zip(["x", "y", "z"]).all(|((n, t), want)| n == want && float(t));
    if !ok {
        return Err(Error::UnsupportedPly {
            path: path.to_path_buf(),
            props: vertex_props.iter().map(|(n, t)| format!("{t} {n}")).collect(),
        });
    }
    let mut out = Vec::new();
    for (name, count) in elements {
        for _ in 0..count {
            let (ln, line) = next("element data")?;
            if name != "vertex" {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(path, ln, format!("expected 3 values, found {}", fields.len())));
            }
            out.push(parse_coords(path, ln, &fields)?);
        }
    }
    Ok(out)
}

fn fmt_point(p: &Point3) -> String {
    format!("{:.8e} {:.8e} {:.8e}", p.x, p.y, p.z)
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = create(path)?;
    let res = match PointFormat::from_path(path) {
        PointFormat::Xyz => write_xyz(&mut w, cloud),
        PointFormat::Ply => write_ply(&mut w, cloud),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_xyz(mut w: impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    for p in cloud.points() {
        writeln!(w, "{}", fmt_point(p))?;
    }
    Ok(())
}

pub fn write_ply(mut w: impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z\nend_header")?;
    write_xyz(w, cloud)
}

/// Wavefront OBJ, `v` and `f` records only. Polygons are fan-triangulated
/// around their first vertex; negative indices count from the end.
pub fn read_mesh(path: &Path) -> Result<(TriangleMesh, usize)> {
    parse_obj(path, open(path)?)
}

pub fn parse_obj(path: &Path, reader: impl BufRead) -> Result<(TriangleMesh, usize)> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    let mut face_no = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let ln = i + 1;
        let mut f = line.split_whitespace();
        match f.next() {
            Some("v") => {
                let fields: Vec<&str> = f.collect();
                if !(3..=4).contains(&fields.len()) {
                    return Err(parse_err(path, ln, "vertex needs 3 coordinates"));
                }
                verts.push(parse_coords(path, ln, &fields[..3])?);
            }
            Some("f") => {
                face_no += 1;
                let mut idx = Vec::new();
                for tok in f {
                    let head = tok.split('/').next().unwrap_or("");
                    let raw: i64 = head
                        .parse()
                        .map_err(|_| parse_err(path, ln, format!("bad face index '{tok}'")))?;
                    let n = verts.len() as i64;
                    let resolved = if raw < 0 { n + raw } else { raw - 1 };
                    if raw == 0 || resolved < 0 || resolved >= n {
                        return Err(Error::FaceIndex {
                            path: path.to_path_buf(),
                            face: face_no,
                            index: raw,
                            count: verts.len(),
                        });
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(path, ln, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(verts, faces)
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut w = create(path)?;
    write_obj(&mut w, mesh)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_obj(mut w: impl Write, mesh: &TriangleMesh) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {}", fmt_point(v))?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn save_weights(path: &Path, weights: &NetworkWeights, k: usize) -> Result<()> {
    let mut w = create(path)?;
    write_weights(weights, k, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<(NetworkWeights, usize)> {
    read_weights(open(path)?)
}

/// Text header that accompanies a weights file.
pub fn weights_header_path(weights: &Path) -> PathBuf {
    let mut s = weights.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Ordered `key=value` record with a versioned header line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunManifest {
    pub entries: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new() -> Self {
        let mut m = Self::default();
        m.set("tool.version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn extend(&mut self, kv: impl IntoIterator<Item = (String, String)>) {
        self.entries.extend(kv);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        to_kv_text(MANIFEST_HEADER, self.entries.iter())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self {
            entries: parse_kv_text(MANIFEST_HEADER, text)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn to_kv_text<'a>(header: &str, entries: impl Iterator<Item = (&'a String, &'a String)>) -> String {
    let mut s = format!("{header}\n");
    for (k, v) in entries {
        s.push_str(&format!("{k}={}\n", escape(v)));
    }
    s
}

fn parse_kv_text(header: &str, text: &str) -> Result<BTreeMap<String, String>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == header => {}
        Some(h) => return Err(Error::Manifest(format!("unexpected header '{h}'"))),
        None => return Err(Error::Manifest("empty file".into())),
    }
    let mut map = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Manifest(format!("line {}: missing '='", i + 2)))?;
        map.insert(k.to_string(), unescape(v));
    }
    Ok(map)
}

/// Report in the same `key=value` layout as manifests, keys kept in insertion order.
pub fn write_report(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut s = format!("{REPORT_HEADER}\n");
    for (k, v) in entries {
        s.push_str(&format!("{k}={}\n", escape(v)));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kv_text(REPORT_HEADER, &text)
}
