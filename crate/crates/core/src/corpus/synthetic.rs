//! Seeded generator of a training corpus of non-binary PDF objects:
//! page-tree dictionaries, fonts, annotations, numeric arrays, strings,
//! names with `#xx` escapes, references and mixed arrays.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::ObjectRecord;
use crate::rng::{seeded, Rng};

pub const DEFAULT_OBJECTS: usize = 5000;
pub const DEFAULT_SEED: u64 = 0x1ea2_f022;

const WORDS: &[&str] = &[
    "Related Work", "Introduction", "Hello", "Overview", "Results", "Chapter 1", "Chapter 2",
    "Appendix", "Summary", "Background", "Evaluation", "Conclusion", "Abstract", "Methods",
    "Acknowledgments", "References", "Table of Contents", "Index",
];
const AUTHORS: &[&str] = &["Alice", "Bob", "Carol", "Dave", "Eve"];
const PRODUCERS: &[&str] = &["pdfTeX-1.40.16", "Acrobat Distiller 10.0", "Ghostscript 9.20", "LibreOffice 5.2"];
const FONTS: &[&str] = &["Helvetica", "Times-Roman", "Courier", "Helvetica-Bold", "Times-Italic", "Symbol"];
const NAMES: &[&str] = &["DeviceRGB", "DeviceGray", "DeviceCMYK", "My#20Name", "XYZ", "Fit", "FitH", "Span", "P", "Sect"];

struct Gen {
    rng: Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn reference(&mut self) -> String {
        format!("{} 0 R", self.rng.gen_range(1..200))
    }

    fn real(&mut self, max: u32) -> String {
        let whole = self.rng.gen_range(0..max);
        match self.rng.gen_range(0..3) {
            0 => whole.to_string(),
            1 => format!("{whole}.{}", self.rng.gen_range(0..10)),
            _ => format!("{whole}.{}", self.rng.gen_range(10..100)),
        }
    }

    fn rect(&mut self) -> String {
        let x = self.rng.gen_range(0..500);
        let y = self.rng.gen_range(0..700);
        format!("[{x} {y} {} {}]", x + self.rng.gen_range(10..100), y + self.rng.gen_range(8..20))
    }

    fn media_box(&mut self) -> &'static str {
        [ "[0 0 612 792]", "[0 0 595 842]", "[0 0 595.28 841.89]" ].choose(&mut self.rng).expect("non-empty")
    }

    fn date(&mut self) -> String {
        format!(
            "(D:{}{:02}{:02}{:02}{:02}{:02})",
            self.rng.gen_range(2005..2018),
            self.rng.gen_range(1..13),
            self.rng.gen_range(1..29),
            self.rng.gen_range(0..24),
            self.rng.gen_range(0..60),
            self.rng.gen_range(0..60)
        )
    }

    fn hex(&mut self, bytes: usize) -> String {
        let mut s = String::from("<");
        for _ in 0..bytes {
            s.push_str(&format!("{:02X}", self.rng.gen::<u8>()));
        }
        s.push('>');
        s
    }

    /// A dictionary, either on one line or one entry per line.
    fn dict(&mut self, entries: Vec<String>) -> String {
        if self.chance(0.5) {
            format!("<< {} >>", entries.join(" "))
        } else {
            format!("<<\n{}\n>>", entries.join("\n"))
        }
    }

    fn page(&mut self) -> String {
        let mut e = vec![
            "/Type /Page".to_string(),
            format!("/Parent {}", self.reference()),
            format!("/MediaBox {}", self.media_box()),
        ];
        if self.chance(0.7) {
            e.push(format!("/Resources << /Font << /F1 {} >> >>", self.reference()));
        }
        e.push(format!("/Contents {}", self.reference()));
        if self.chance(0.3) {
            let n = self.rng.gen_range(1..4);
            let refs: Vec<String> = (0..n).map(|_| self.reference()).collect();
            e.push(format!("/Annots [{}]", refs.join(" ")));
        }
        if self.chance(0.15) {
            e.push(format!("/Rotate {}", [0, 90, 180, 270].choose(&mut self.rng).expect("non-empty")));
        }
        self.dict(e)
    }

    fn pages(&mut self) -> String {
        let n = self.rng.gen_range(1..6);
        let kids: Vec<String> = (0..n).map(|_| self.reference()).collect();
        let mut e = vec!["/Type /Pages".to_string(), format!("/Kids [{}]", kids.join(" ")), format!("/Count {n}")];
        if self.chance(0.3) {
            e.push(format!("/Parent {}", self.reference()));
        }
        self.dict(e)
    }

    fn catalog(&mut self) -> String {
        let mut e = vec!["/Type /Catalog".to_string(), format!("/Pages {}", self.reference())];
        if self.chance(0.4) {
            e.push(format!("/Outlines {}", self.reference()));
            e.push("/PageMode /UseOutlines".to_string());
        }
        self.dict(e)
    }

    fn font(&mut self) -> String {
        let mut e = vec![
            "/Type /Font".to_string(),
            format!("/Subtype /{}", if self.chance(0.8) { "Type1" } else { "TrueType" }),
            format!("/BaseFont /{}", self.pick(FONTS)),
        ];
        if self.chance(0.5) {
            e.push("/Encoding /WinAnsiEncoding".to_string());
        }
        if self.chance(0.3) {
            e.push("/FirstChar 32".to_string());
            e.push("/LastChar 126".to_string());
            e.push(format!("/Widths {}", self.reference()));
        }
        self.dict(e)
    }

    fn annot(&mut self) -> String {
        let e = vec![
            "/Type /Annot".to_string(),
            "/Subtype /Link".to_string(),
            format!("/Rect {}", self.rect()),
            "/Border [0 0 0]".to_string(),
            format!("/Dest [{} /XYZ 0 {} null]", self.reference(), self.rng.gen_range(100..800)),
        ];
        self.dict(e)
    }

    fn info(&mut self) -> String {
        let mut e = vec![format!("/Title ({})", self.pick(WORDS)), format!("/Author ({})", self.pick(AUTHORS))];
        if self.chance(0.6) {
            e.push(format!("/Producer ({})", self.pick(PRODUCERS)));
        }
        e.push(format!("/CreationDate {}", self.date()));
        self.dict(e)
    }

    fn outline(&mut self) -> String {
        let mut e = vec![format!("/Title ({})", self.pick(WORDS)), format!("/Parent {}", self.reference())];
        if self.chance(0.5) {
            e.push(format!("/Next {}", self.reference()));
        }
        e.push(format!("/Dest [{} /Fit]", self.reference()));
        self.dict(e)
    }

    fn ext_gstate(&mut self) -> String {
        let a = self.rng.gen_range(1..10);
        self.dict(vec!["/Type /ExtGState".to_string(), format!("/CA 0.{a}"), format!("/ca 0.{a}")])
    }

    fn number_array(&mut self) -> String {
        let n = self.rng.gen_range(2..9);
        let base = self.real(1000);
        let xs: Vec<String> = (0..n).map(|_| if self.chance(0.5) { base.clone() } else { self.real(1000) }).collect();
        format!("[{}]", xs.join(" "))
    }

    fn mixed_array(&mut self) -> String {
        let n = self.rng.gen_range(2..6);
        let items: Vec<String> = (0..n)
            .map(|_| match self.rng.gen_range(0..6) {
                0 => if self.chance(0.5) { "true" } else { "false" }.to_string(),
                1 => self.rng.gen_range(0..500).to_string(),
                2 => self.real(200),
                3 => format!("({})", self.pick(WORDS)),
                4 => format!("/{}", self.pick(NAMES)),
                _ => self.reference(),
            })
            .collect();
        format!("[{}]", items.join(" "))
    }

    fn value(&mut self) -> String {
        match self.rng.gen_range(0..100) {
            0..=13 => self.page(),
            14..=23 => self.pages(),
            24..=29 => self.catalog(),
            30..=41 => self.font(),
            42..=49 => self.annot(),
            50..=54 => self.info(),
            55..=60 => self.outline(),
            61..=64 => self.ext_gstate(),
            65..=76 => self.number_array(),
            77..=82 => self.mixed_array(),
            83..=88 => format!("({})", self.pick(WORDS)),
            89..=92 => self.rng.gen_range(0..100_000).to_string(),
            93..=95 => format!("/{}", self.pick(NAMES)),
            _ => {
                let h1 = self.hex(8);
                let h2 = self.hex(8);
                format!("[{h1} {h2}]")
            }
        }
    }
}

/// `n` objects numbered 1..=n, deterministic in `seed`.
pub fn synthetic_objects(n: usize, seed: u64) -> Vec<ObjectRecord> {
    let mut g = Gen { rng: seeded(seed) };
    (1..=n as u32)
        .map(|id| {
            let generation = if g.chance(0.05) { 1 } else { 0 };
            let value = g.value();
            let sep = if value.contains('\n') || g.chance(0.5) { "\n" } else { " " };
            let body = format!("{id} {generation} obj{sep}{value}{sep}endobj");
            ObjectRecord { object_id: id, generation, body: body.into_bytes(), source: "synthetic".to_string() }
        })
        .collect()
}

/// The bundled training corpus.
pub fn default_corpus() -> Vec<ObjectRecord> {
    synthetic_objects(DEFAULT_OBJECTS, DEFAULT_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdfcore::parse_object;

    #[test]
    fn every_synthetic_object_is_well_formed() {
        for rec in synthetic_objects(2000, 11) {
            let out = parse_object(&rec.body, true);
            assert!(out.passed(), "{:?}: {}", out.failure(), String::from_utf8_lossy(&rec.body));
            let h = out.header.unwrap();
            assert_eq!((h.id, h.generation), (rec.object_id, rec.generation));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(synthetic_objects(50, 3), synthetic_objects(50, 3));
        assert_ne!(synthetic_objects(50, 3), synthetic_objects(50, 4));
    }
}
