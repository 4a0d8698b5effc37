//! Plain-text mesh format: a header line `nv nt`, then `nv` lines `x y`, then
//! `nt` lines `i j k` with 0-based vertex indices.

use std::io::{BufRead, Write};
use std::path::Path;

use super::Mesh;
use crate::error::MeshError;

impl Mesh {
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.num_vertices(), self.num_triangles())?;
        for p in &self.vertices {
            writeln!(w, "{:e} {:e}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Mesh, MeshError> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| MeshError::Parse(e.to_string()))?;
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| MeshError::Parse(format!("unexpected end of file reading {what}")))
        };
        let count = |s: String| {
            s.parse::<usize>()
                .map_err(|_| MeshError::Parse(format!("bad count `{s}`")))
        };
        let nv = count(next("header")?)?;
        let nt = count(next("header")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for i in 0..nv {
            let mut c = [0.0; 2];
            for x in &mut c {
                let s = next("vertex")?;
                *x = s
                    .parse()
                    .map_err(|_| MeshError::Parse(format!("vertex {i}: bad coordinate `{s}`")))?;
            }
            vertices.push(c);
        }
        let mut triangles = Vec::with_capacity(nt);
        for t in 0..nt {
            let mut c = [0usize; 3];
            for x in &mut c {
                let s = next("triangle")?;
                *x = s
                    .parse()
                    .map_err(|_| MeshError::Parse(format!("triangle {t}: bad index `{s}`")))?;
            }
            triangles.push(c);
        }
        if next("trailing").is_ok() {
            return Err(MeshError::Parse(
                "trailing data after the last triangle".into(),
            ));
        }
        Mesh::new(vertices, triangles)
    }

    pub fn read_file(path: impl AsRef<Path>) -> crate::Result<Mesh> {
        let f = std::fs::File::open(path)?;
        Ok(Mesh::read_text(std::io::BufReader::new(f))?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> crate::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_text(&mut f)?;
        f.flush()?;
        Ok(())
    }
}
