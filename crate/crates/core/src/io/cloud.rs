use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, PointLabel};
use crate::scalar::{lit, to_f64, Real};

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: '{s}' is not a number")))
}

fn parse_label(s: &str, line: usize) -> Result<PointLabel> {
    let code = s.trim().parse::<i64>().map_err(|_| Error::Parse(format!("line {line}: label '{s}' is not an integer")))?;
    PointLabel::from_code(code).ok_or_else(|| Error::Parse(format!("line {line}: unknown label code {code}")))
}

fn finish<T: Real>(points: Vec<Point3<T>>, labels: Vec<PointLabel>, labeled: bool) -> Result<PointCloud<T>> {
    if labeled {
        PointCloud::with_labels(points, labels)
    } else {
        Ok(PointCloud::new(points))
    }
}

/// Reads an ASCII PLY whose vertex element has `x`, `y`, `z` and optionally
/// an integer `label` property. Elements after the vertices are ignored.
pub fn read_ply<T: Real, R: Read>(input: R) -> Result<PointCloud<T>> {
    let mut lines = BufReader::new(input).lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((i, l)) => Ok(Some((i, l?))),
            None => Ok(None),
        }
    };
    match next()? {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::Parse("line 1: missing 'ply' magic".into())),
    }
    let mut vertices: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    loop {
        let Some((i, l)) = next()? else {
            return Err(Error::Parse("unexpected end of file in header".into()));
        };
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", fmt, ..] if *fmt != "ascii" => return Err(Error::Parse(format!("line {i}: only ascii PLY is supported"))),
            ["element", "vertex", n] => {
                vertices = Some(n.parse().map_err(|_| Error::Parse(format!("line {i}: bad vertex count '{n}'")))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", "list", ..] if in_vertex => return Err(Error::Parse(format!("line {i}: list properties on vertices are not supported"))),
            ["property", _, name] if in_vertex => props.push(name.to_string()),
            _ => {}
        }
    }
    let n = vertices.ok_or_else(|| Error::Parse("header declares no vertex element".into()))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (Some(ix), Some(iy), Some(iz)) = (col("x"), col("y"), col("z")) else {
        return Err(Error::Parse("vertex element lacks x, y or z".into()));
    };
    let il = col("label");
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::new();
    for _ in 0..n {
        let Some((i, l)) = next()? else {
            return Err(Error::Parse(format!("expected {n} vertices, file ends after {}", points.len())));
        };
        let words: Vec<&str> = l.split_whitespace().collect();
        if words.len() != props.len() {
            return Err(Error::Parse(format!("line {i}: expected {} values, found {}", props.len(), words.len())));
        }
        points.push(Point3::new(lit(parse_f64(words[ix], i)?), lit(parse_f64(words[iy], i)?), lit(parse_f64(words[iz], i)?)));
        if let Some(il) = il {
            labels.push(parse_label(words[il], i)?);
        }
    }
    finish(points, labels, il.is_some())
}

/// ASCII PLY with double coordinates and an int `label` when the cloud is
/// labeled.
pub fn write_ply<T: Real, W: Write>(cloud: &PointCloud<T>, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "ply\nformat ascii 1.0\ncomment graspkit point cloud\nelement vertex {}", cloud.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if cloud.labels.is_some() {
        writeln!(w, "property int label")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        write!(w, "{} {} {}", to_f64(p.x), to_f64(p.y), to_f64(p.z))?;
        if let Some(l) = &cloud.labels {
            write!(w, " {}", l[i].code())?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `x,y,z[,label]` rows. A first row that does not parse as numbers is
/// taken as the header.
pub fn read_csv<T: Real, R: Read>(input: R) -> Result<PointCloud<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if !(rec.len() == 3 || rec.len() == 4) {
            return Err(Error::Parse(format!("line {line}: expected 3 or 4 fields, found {}", rec.len())));
        }
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Parse(format!("line {line}: inconsistent field count")));
        }
        points.push(Point3::new(lit(parse_f64(&rec[0], line)?), lit(parse_f64(&rec[1], line)?), lit(parse_f64(&rec[2], line)?)));
        if rec.len() == 4 {
            labels.push(parse_label(&rec[3], line)?);
        }
    }
    finish(points, labels, width == Some(4))
}

pub fn write_csv<T: Real, W: Write>(cloud: &PointCloud<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if cloud.labels.is_some() {
        w.write_record(["x", "y", "z", "label"])?;
    } else {
        w.write_record(["x", "y", "z"])?;
    }
    for (i, p) in cloud.points.iter().enumerate() {
        let mut row = vec![to_f64(p.x).to_string(), to_f64(p.y).to_string(), to_f64(p.z).to_string()];
        if let Some(l) = &cloud.labels {
            row.push(l[i].code().to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Dispatches on the extension: `.csv` is CSV, anything else PLY.
pub fn read_cloud<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    let f = File::open(path)?;
    if is_csv(path) {
        read_csv(f)
    } else {
        read_ply(f)
    }
}

pub fn write_cloud<T: Real>(path: &Path, cloud: &PointCloud<T>) -> Result<()> {
    let f = File::create(path)?;
    if is_csv(path) {
        write_csv(cloud, f)
    } else {
        write_ply(cloud, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud<f64> {
        PointCloud::with_labels(
            vec![Point3::new(0.1, -2.5, 3.0), Point3::new(1e-9, 0.3333333333333333, 7.0)],
            vec![PointLabel::Object, PointLabel::Outlier],
        )
        .unwrap()
    }

    #[test]
    fn ply_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_ply(&sample(), &mut buf).unwrap();
        assert_eq!(read_ply::<f64, _>(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn csv_round_trip_and_headerless() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        assert_eq!(read_csv::<f64, _>(buf.as_slice()).unwrap(), sample());
        let bare: PointCloud<f64> = read_csv("1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(bare.len(), 2);
        assert!(bare.labels.is_none());
    }

    #[test]
    fn foreign_ply_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n9 1 2 3\n9 4 5 6\n";
        let c: PointCloud<f32> = read_ply(text.as_bytes()).unwrap();
        assert_eq!(c.points[1], Point3::new(4.0f32, 5.0, 6.0));
    }

    #[test]
    fn malformed_inputs_are_parse_errors() {
        let bad = ["", "ply\nformat binary_little_endian 1.0\nend_header\n", "ply\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n"];
        for b in bad {
            assert!(matches!(read_ply::<f64, _>(b.as_bytes()), Err(Error::Parse(_))), "{b:?}");
        }
        assert!(matches!(read_csv::<f64, _>("1,2\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_csv::<f64, _>("1,2,3,9\n".as_bytes()), Err(Error::Parse(_))));
    }
}
