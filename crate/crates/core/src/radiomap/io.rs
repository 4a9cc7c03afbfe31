//! Plain-text PGM images and SVG overlays for cities, maps and
//! explanations.

use std::fmt::Write as _;

use super::city::CityMap;
use super::propagation::RadioMap;
use super::scene::RadioScene;
use crate::error::{RdxError, Result};

/// Decoded P2 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: Vec<u32>,
}

fn write_p2(width: usize, height: usize, pixels: impl Iterator<Item = u32>) -> String {
    let mut out = format!("P2\n{width} {height}\n255\n");
    let pixels: Vec<u32> = pixels.collect();
    for row in pixels.chunks(width) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// 0 for free cells, 255 inside buildings.
pub fn city_to_pgm(city: &CityMap) -> String {
    write_p2(
        city.width(),
        city.height(),
        city.grid().into_iter().map(|v| 255 * u32::from(v)),
    )
}

/// Round-half-up of `strength · 255`.
pub fn strength_to_gray(v: f64) -> u32 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u32
}

pub fn map_to_pgm(map: &RadioMap) -> String {
    write_p2(map.width, map.height, map.values.iter().map(|&v| strength_to_gray(v)))
}

pub fn parse_pgm(text: &str) -> Result<Pgm> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        tokens.extend(body.split_whitespace().map(|t| (i + 1, t)));
    }
    let mut it = tokens.into_iter();
    let parse_err = |line, message: String| RdxError::Parse { line, message };
    match it.next() {
        Some((_, "P2")) => {}
        Some((l, t)) => return Err(parse_err(l, format!("expected P2 magic, got `{t}`"))),
        None => return Err(parse_err(1, "empty image".into())),
    }
    let mut num = |what: &str| -> Result<u32> {
        let (l, t) = it
            .next()
            .ok_or_else(|| parse_err(0, format!("missing {what}")))?;
        t.parse()
            .map_err(|_| parse_err(l, format!("bad {what} `{t}`")))
    };
    let width = num("width")? as usize;
    let height = num("height")? as usize;
    let maxval = num("maxval")?;
    let pixels = (0..width * height)
        .map(|_| num("pixel"))
        .collect::<Result<Vec<u32>>>()?;
    if let Some(&p) = pixels.iter().find(|&&p| p > maxval) {
        return Err(parse_err(0, format!("pixel {p} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        pixels,
    })
}

const CELL: usize = 12;

/// Gray radio map, blue buildings, red measurements, green region outline.
/// Components listed in `selected` (flat encoding order: buildings, then
/// measurements) are drawn with a thick yellow outline.
pub fn render_overlay(scene: &RadioScene, map: &RadioMap, selected: &[usize]) -> String {
    let (w, h) = (map.width, map.height);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w * CELL,
        h * CELL,
        w * CELL,
        h * CELL
    );
    for y in 0..h {
        for x in 0..w {
            let g = strength_to_gray(map.get(x, y));
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({g},{g},{g})"/>"#,
                x * CELL,
                y * CELL
            );
        }
    }
    let nb = scene.noisy_city().buildings().len();
    for (i, b) in scene.noisy_city().buildings().iter().enumerate() {
        let stroke = if selected.contains(&i) {
            r#" stroke="yellow" stroke-width="3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="blue" fill-opacity="0.6"{stroke}><title>building {}</title></rect>"#,
            b.x0 * CELL,
            b.y0 * CELL,
            (b.x1 - b.x0 + 1) * CELL,
            (b.y1 - b.y0 + 1) * CELL,
            b.id
        );
    }
    for (j, m) in scene.measurements().iter().enumerate() {
        let stroke = if selected.contains(&(nb + j)) {
            r#" stroke="yellow" stroke-width="3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="{}" fill="red"{stroke}><title>measurement {j}: {:.4}</title></circle>"#,
            m.x * CELL + CELL / 2,
            m.y * CELL + CELL / 2,
            CELL / 3,
            m.strength
        );
    }
    let tx = scene.tx();
    let _ = writeln!(
        svg,
        r#"<path d="M {} {} l {} {} l {} 0 z" fill="orange"><title>transmitter</title></path>"#,
        tx.x * CELL + CELL / 2,
        tx.y * CELL,
        CELL / 2,
        CELL,
        -(CELL as i64)
    );
    let r = scene.region();
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="lime" stroke-width="2"/>"#,
        r.x0 * CELL,
        r.y0 * CELL,
        (r.x1 - r.x0 + 1) * CELL,
        (r.y1 - r.y0 + 1) * CELL
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::super::city::Building;
    use super::*;

    #[test]
    fn gray_rounds_half_up() {
        assert_eq!(strength_to_gray(0.0), 0);
        assert_eq!(strength_to_gray(1.0), 255);
        assert_eq!(strength_to_gray(0.5), 128);
        assert_eq!(strength_to_gray(1.5 / 255.0), 2);
    }

    #[test]
    fn city_pgm_round_trip() {
        let b = Building { id: 0, x0: 1, y0: 0, x1: 2, y1: 1 };
        let city = CityMap::new(2, 4, vec![b]).unwrap();
        let text = city_to_pgm(&city);
        assert_eq!(text, "P2\n4 2\n255\n0 255 255 0\n0 255 255 0\n");
        let img = parse_pgm(&text).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (4, 2, 255));
        let grid: Vec<u32> = city.grid().into_iter().map(|v| 255 * v as u32).collect();
        assert_eq!(img.pixels, grid);
    }

    #[test]
    fn bad_pgm_is_rejected() {
        assert!(parse_pgm("P5\n1 1\n255\n0\n").is_err());
        assert!(parse_pgm("P2\n2 1\n255\n0\n").is_err());
        assert!(parse_pgm("P2\n1 1\n10\n11\n").is_err());
        assert!(parse_pgm("P2 # comment\n1 1\n255\n7\n").is_ok());
    }
}
