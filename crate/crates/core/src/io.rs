//! OFF and OBJ mesh files.
//!
//! The body holds a stereographic projection to R³ for viewers. Exact S³
//! coordinates, vertex tags and scalar fields travel in comment lines:
//!
//! ```text
//! OFF
//! # lawson m=2 k=2 n=16 iteration=5 residual=1.2e-7
//! # pole 0.5 0.5 0.5 0.5
//! #v4 x1 x2 x3 x4        (one per vertex)
//! #tag a0                (one per vertex)
//! # field lambda_1
//! #s 0.0132              (one per vertex)
//! V F 0
//! ...
//! ```

use crate::mesh::{MeshError, TriMesh, VertexTag};
use crate::sphere::{LawsonParams, Vec4};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshHeader {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub iteration: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshFile {
    pub mesh: TriMesh,
    pub header: Option<MeshHeader>,
    pub fields: Vec<ScalarField>,
}

impl MeshFile {
    pub fn new(mesh: TriMesh) -> Self {
        Self {
            mesh,
            header: None,
            fields: Vec::new(),
        }
    }

    pub fn with_header(mut self, header: MeshHeader) -> Self {
        self.header = Some(header);
        self
    }

    pub fn with_field(mut self, name: &str, values: Vec<f64>) -> Self {
        self.fields.push(ScalarField {
            name: name.to_string(),
            values,
        });
        self
    }
}

const POLES: usize = 24;

fn candidate_pole(i: usize) -> Vec4 {
    if i < 8 {
        let mut v = Vec4::zeros();
        v[i / 2] = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        v
    } else {
        let b = i - 8;
        Vec4::from_fn(|c, _| if b >> c & 1 == 1 { -0.5 } else { 0.5 })
    }
}

/// Projection pole: the candidate (±e_i or (±½,±½,±½,±½)) farthest from
/// every vertex.
pub fn choose_pole(vertices: &[Vec4]) -> Vec4 {
    let mut best = (f64::NEG_INFINITY, candidate_pole(0));
    for i in 0..POLES {
        let p = candidate_pole(i);
        let gap = vertices
            .iter()
            .map(|x| 1.0 - x.dot(&p))
            .fold(f64::INFINITY, f64::min);
        if gap > best.0 {
            best = (gap, p);
        }
    }
    best.1
}

/// Orthonormal basis of `pole⊥`.
fn tangent_basis(pole: &Vec4) -> [Vec4; 3] {
    let mut out: Vec<Vec4> = Vec::with_capacity(3);
    for i in 0..4 {
        let mut e = Vec4::zeros();
        e[i] = 1.0;
        e -= pole * pole.dot(&e);
        for b in &out {
            e -= b * b.dot(&e);
        }
        if e.norm() > 0.5 && out.len() < 3 {
            out.push(e.normalize());
        }
    }
    [out[0], out[1], out[2]]
}

/// Stereographic projection from `pole` onto `pole⊥ ≅ R³`.
pub fn stereographic(vertices: &[Vec4], pole: &Vec4) -> Vec<[f64; 3]> {
    let basis = tangent_basis(pole);
    vertices
        .iter()
        .map(|x| {
            let s = 1.0 - x.dot(pole);
            let y = x - pole * x.dot(pole);
            [
                basis[0].dot(&y) / s,
                basis[1].dot(&y) / s,
                basis[2].dot(&y) / s,
            ]
        })
        .collect()
}

pub fn inverse_stereographic(points: &[[f64; 3]], pole: &Vec4) -> Vec<Vec4> {
    let basis = tangent_basis(pole);
    points
        .iter()
        .map(|p| {
            let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            let y = basis[0] * p[0] + basis[1] * p[1] + basis[2] * p[2];
            (y * 2.0 + pole * (r2 - 1.0)) / (r2 + 1.0)
        })
        .collect()
}

fn write_comments<W: Write>(w: &mut W, file: &MeshFile, pole: &Vec4) -> std::io::Result<()> {
    if let Some(h) = &file.header {
        writeln!(
            w,
            "# lawson m={} k={} n={} iteration={} residual={:e}",
            h.m, h.k, h.n, h.iteration, h.residual
        )?;
    }
    writeln!(w, "# pole {} {} {} {}", pole[0], pole[1], pole[2], pole[3])?;
    for x in &file.mesh.vertices {
        writeln!(w, "#v4 {} {} {} {}", x[0], x[1], x[2], x[3])?;
    }
    for t in &file.mesh.tags {
        writeln!(w, "#tag {}", t.code())?;
    }
    for f in &file.fields {
        writeln!(w, "# field {}", f.name)?;
        for v in &f.values {
            writeln!(w, "#s {v}")?;
        }
    }
    Ok(())
}

pub fn write_off<W: Write>(w: &mut W, file: &MeshFile) -> std::io::Result<()> {
    let mesh = &file.mesh;
    let pole = choose_pole(&mesh.vertices);
    writeln!(w, "OFF")?;
    write_comments(w, file, &pole)?;
    writeln!(w, "{} {} 0", mesh.vertex_count(), mesh.face_count())?;
    for p in stereographic(&mesh.vertices, &pole) {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

pub fn write_obj<W: Write>(w: &mut W, file: &MeshFile) -> std::io::Result<()> {
    let mesh = &file.mesh;
    let pole = choose_pole(&mesh.vertices);
    write_comments(w, file, &pole)?;
    for p in stereographic(&mesh.vertices, &pole) {
        writeln!(w, "v {} {} {}", p[0], p[1], p[2])?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

#[derive(Default)]
struct Comments {
    header: Option<MeshHeader>,
    pole: Option<Vec4>,
    v4: Vec<Vec4>,
    tags: Vec<VertexTag>,
    fields: Vec<ScalarField>,
}

fn numbers<T: std::str::FromStr>(text: &str, line: usize) -> Result<Vec<T>, IoError> {
    text.split_whitespace()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| parse_err(line, format!("bad number `{s}`")))
        })
        .collect()
}

fn vec4(text: &str, line: usize) -> Result<Vec4, IoError> {
    let v: Vec<f64> = numbers(text, line)?;
    if v.len() != 4 {
        return Err(parse_err(line, "expected 4 coordinates"));
    }
    Ok(Vec4::new(v[0], v[1], v[2], v[3]))
}

fn parse_header(text: &str, line: usize) -> Result<MeshHeader, IoError> {
    let mut h = MeshHeader {
        m: 0,
        k: 0,
        n: 0,
        iteration: 0,
        residual: 0.0,
    };
    for item in text.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("bad header item `{item}`")))?;
        let bad = || parse_err(line, format!("bad value for `{key}`"));
        match key {
            "m" => h.m = value.parse().map_err(|_| bad())?,
            "k" => h.k = value.parse().map_err(|_| bad())?,
            "n" => h.n = value.parse().map_err(|_| bad())?,
            "iteration" => h.iteration = value.parse().map_err(|_| bad())?,
            "residual" => h.residual = value.parse().map_err(|_| bad())?,
            _ => return Err(parse_err(line, format!("unknown header key `{key}`"))),
        }
    }
    Ok(h)
}

impl Comments {
    fn take(&mut self, text: &str, line: usize) -> Result<(), IoError> {
        if let Some(rest) = text.strip_prefix("#v4 ") {
            self.v4.push(vec4(rest, line)?);
        } else if let Some(rest) = text.strip_prefix("#tag ") {
            self.tags.push(
                VertexTag::parse(rest.trim()).ok_or_else(|| parse_err(line, "bad vertex tag"))?,
            );
        } else if let Some(rest) = text.strip_prefix("#s ") {
            let field = self
                .fields
                .last_mut()
                .ok_or_else(|| parse_err(line, "scalar value before any field"))?;
            field.values.push(
                rest.trim()
                    .parse()
                    .map_err(|_| parse_err(line, "bad scalar value"))?,
            );
        } else if let Some(rest) = text.strip_prefix("# field ") {
            self.fields.push(ScalarField {
                name: rest.trim().to_string(),
                values: Vec::new(),
            });
        } else if let Some(rest) = text.strip_prefix("# lawson ") {
            self.header = Some(parse_header(rest, line)?);
        } else if let Some(rest) = text.strip_prefix("# pole ") {
            self.pole = Some(vec4(rest, line)?);
        }
        Ok(())
    }

    fn finish(self, body: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<MeshFile, IoError> {
        let count = body.len();
        let vertices = if self.v4.is_empty() {
            let pole = self.pole.unwrap_or_else(|| Vec4::new(0.0, 0.0, 0.0, 1.0));
            inverse_stereographic(&body, &pole)
        } else if self.v4.len() == count {
            self.v4
        } else {
            return Err(parse_err(
                0,
                format!("{} #v4 lines for {count} vertices", self.v4.len()),
            ));
        };
        let mut mesh = TriMesh::new(vertices, faces)?;
        if !self.tags.is_empty() {
            if self.tags.len() != count {
                return Err(parse_err(
                    0,
                    format!("{} #tag lines for {count} vertices", self.tags.len()),
                ));
            }
            mesh.tags = self.tags;
        }
        for f in &self.fields {
            if f.values.len() != count {
                return Err(parse_err(
                    0,
                    format!("field `{}` has {} values", f.name, f.values.len()),
                ));
            }
        }
        if let Some(h) = &self.header {
            mesh.resolution = h.n;
            mesh.params = LawsonParams::new(h.m, h.k).ok();
        }
        Ok(MeshFile {
            mesh,
            header: self.header,
            fields: self.fields,
        })
    }
}

pub fn read_off<R: BufRead>(r: R) -> Result<MeshFile, IoError> {
    let mut comments = Comments::default();
    let mut counts: Option<(usize, usize)> = None;
    let mut seen_magic = false;
    let mut body = Vec::new();
    let mut faces = Vec::new();
    for (i, text) in r.lines().enumerate() {
        let text = text?;
        let line = i + 1;
        let trimmed = text.trim();
        if trimmed.starts_with('#') {
            comments.take(trimmed, line)?;
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        if !seen_magic {
            if trimmed != "OFF" {
                return Err(parse_err(line, "missing OFF magic"));
            }
            seen_magic = true;
            continue;
        }
        match counts {
            None => {
                let c: Vec<usize> = numbers(trimmed, line)?;
                if c.len() < 2 {
                    return Err(parse_err(line, "expected vertex and face counts"));
                }
                counts = Some((c[0], c[1]));
            }
            Some((nv, _)) if body.len() < nv => {
                let p: Vec<f64> = numbers(trimmed, line)?;
                if p.len() != 3 {
                    return Err(parse_err(line, "expected 3 coordinates"));
                }
                body.push([p[0], p[1], p[2]]);
            }
            Some((_, nf)) if faces.len() < nf => {
                let f: Vec<usize> = numbers(trimmed, line)?;
                if f.len() != 4 || f[0] != 3 {
                    return Err(parse_err(line, "only triangles are supported"));
                }
                faces.push([f[1], f[2], f[3]]);
            }
            Some(_) => return Err(parse_err(line, "trailing data")),
        }
    }
    match counts {
        Some((nv, nf)) if body.len() == nv && faces.len() == nf => comments.finish(body, faces),
        _ => Err(parse_err(0, "truncated OFF file")),
    }
}

pub fn read_obj<R: BufRead>(r: R) -> Result<MeshFile, IoError> {
    let mut comments = Comments::default();
    let mut body = Vec::new();
    let mut faces = Vec::new();
    for (i, text) in r.lines().enumerate() {
        let text = text?;
        let line = i + 1;
        let trimmed = text.trim();
        if trimmed.starts_with('#') {
            comments.take(trimmed, line)?;
        } else if let Some(rest) = trimmed.strip_prefix("v ") {
            let p: Vec<f64> = numbers(rest, line)?;
            if p.len() != 3 {
                return Err(parse_err(line, "expected 3 coordinates"));
            }
            body.push([p[0], p[1], p[2]]);
        } else if let Some(rest) = trimmed.strip_prefix("f ") {
            let idx: Vec<usize> = rest
                .split_whitespace()
                .map(|s| s.split('/').next().unwrap_or(s))
                .map(|s| s.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1))
                .collect::<Option<_>>()
                .ok_or_else(|| parse_err(line, "bad face index"))?;
            if idx.len() != 3 {
                return Err(parse_err(line, "only triangles are supported"));
            }
            faces.push([idx[0], idx[1], idx[2]]);
        }
    }
    comments.finish(body, faces)
}

pub fn save_off(path: &std::path::Path, file: &MeshFile) -> Result<(), IoError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_off(&mut w, file)?;
    w.flush()?;
    Ok(())
}

pub fn save_obj(path: &std::path::Path, file: &MeshFile) -> Result<(), IoError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_obj(&mut w, file)?;
    w.flush()?;
    Ok(())
}

pub fn load_off(path: &std::path::Path) -> Result<MeshFile, IoError> {
    read_off(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn load_obj(path: &std::path::Path) -> Result<MeshFile, IoError> {
    read_obj(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plateau::{clifford_patch, init_disk_mesh};

    fn sample() -> MeshFile {
        let p = LawsonParams::new(2, 2).unwrap();
        let mesh = init_disk_mesh(&p, 4).unwrap();
        let phi: Vec<f64> = mesh.vertices.iter().map(|x| x[0] - 0.1 * x[3]).collect();
        MeshFile::new(mesh)
            .with_header(MeshHeader {
                m: 2,
                k: 2,
                n: 4,
                iteration: 7,
                residual: 3.25e-9,
            })
            .with_field("phi", phi)
    }

    #[test]
    fn off_round_trip_is_exact() {
        let file = sample();
        let mut buf = Vec::new();
        write_off(&mut buf, &file).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("OFF\n# lawson m=2 k=2 n=4 iteration=7 residual=3.25e-9\n"));
        let back = read_off(&buf[..]).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn obj_round_trip_is_exact() {
        let file = sample();
        let mut buf = Vec::new();
        write_obj(&mut buf, &file).unwrap();
        assert_eq!(read_obj(&buf[..]).unwrap(), file);
    }

    #[test]
    fn plain_off_uses_inverse_projection() {
        let mesh = clifford_patch(3).unwrap();
        let pole = choose_pole(&mesh.vertices);
        let mut text = String::from("OFF\n");
        text += &format!("# pole {} {} {} {}\n", pole[0], pole[1], pole[2], pole[3]);
        text += &format!("{} {} 0\n", mesh.vertex_count(), mesh.face_count());
        for p in stereographic(&mesh.vertices, &pole) {
            text += &format!("{} {} {}\n", p[0], p[1], p[2]);
        }
        for f in &mesh.faces {
            text += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
        }
        let back = read_off(text.as_bytes()).unwrap();
        assert_eq!(back.mesh.faces, mesh.faces);
        for (a, b) in back.mesh.vertices.iter().zip(&mesh.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn pole_avoids_vertices() {
        let mesh = clifford_patch(6).unwrap();
        let pole = choose_pole(&mesh.vertices);
        assert!(mesh.vertices.iter().all(|x| x.dot(&pole) < 0.9));
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            read_off("OFF\n3 1 0\n0 0 0\n".as_bytes()),
            Err(IoError::Parse { .. })
        ));
        assert!(matches!(
            read_off("PLY\n".as_bytes()),
            Err(IoError::Parse { .. })
        ));
        assert!(matches!(
            read_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 2\n".as_bytes()),
            Err(IoError::Parse { .. })
        ));
        assert!(matches!(
            read_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n".as_bytes()),
            Err(IoError::Mesh(_))
        ));
        assert!(matches!(
            read_off("OFF\n# lawson m=x\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n".as_bytes()),
            Err(IoError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn file_helpers_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = sample();
        let off = dir.path().join("patch.off");
        let obj = dir.path().join("patch.obj");
        save_off(&off, &file).unwrap();
        save_obj(&obj, &file).unwrap();
        assert_eq!(load_off(&off).unwrap(), file);
        assert_eq!(load_obj(&obj).unwrap(), file);
    }
}
