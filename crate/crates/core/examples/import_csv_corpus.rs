//! Convert CSV exports into raw recordings plus a manifest that
//! `pdeeg preprocess` accepts.
//!
//! cargo run --release --example import_csv_corpus -- subjects.csv out_dir/
//!
//! `subjects.csv` has a header `file,subject_id,label,medication,fs_hz`;
//! `file` is relative to `subjects.csv`. Without arguments a two-subject
//! demo is written to a temporary directory first.

use std::path::{Path, PathBuf};

use pdeeg::dataio::{import_csv, synth_recording, write_recording, CorpusManifest, CsvMetadata, SynthSpec};

fn demo_inputs() -> Result<PathBuf, Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("pdeeg-csv-demo");
    std::fs::create_dir_all(&dir)?;
    let spec = SynthSpec { n_pd: 1, n_hc: 1, duration_s: 6.0, ..SynthSpec::default() };
    let mut index = String::from("file,subject_id,label,medication,fs_hz\n");
    for i in 0..2 {
        let rec = synth_recording(&spec, i)?;
        let file = format!("{}.csv", rec.subject_id);
        let mut w = csv::Writer::from_path(dir.join(&file))?;
        w.write_record(&rec.channel_labels)?;
        for t in 0..rec.n_samples() {
            w.write_record(rec.samples.iter().map(|ch| format!("{:.4}", ch[t])))?;
        }
        w.flush()?;
        let label = if rec.label.is_positive() { "PD" } else { "HC" };
        index.push_str(&format!("{file},{},{label},{},{}\n", rec.subject_id, if rec.label.is_positive() { "off" } else { "na" }, rec.fs_hz));
    }
    let path = dir.join("subjects.csv");
    std::fs::write(&path, index)?;
    Ok(path)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (index, out) = match args.as_slice() {
        [i, o] => (PathBuf::from(i), PathBuf::from(o)),
        _ => (demo_inputs()?, std::env::temp_dir().join("pdeeg-csv-demo/corpus")),
    };
    let base = index.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(&out)?;
    let mut rels = Vec::new();
    for row in csv::Reader::from_path(&index)?.records() {
        let row = row?;
        let meta = CsvMetadata { subject_id: row[1].to_string(), label: row[2].parse()?, medication: row[3].parse()? };
        let rec = import_csv(&base.join(&row[0]), row[4].parse()?, &meta)?;
        let rel = format!("{}.raw", meta.subject_id);
        write_recording(&rec, &out.join(&rel))?;
        println!("{} -> {rel}: {} channels, {:.1} s at {} Hz", &row[0], rec.n_channels(), rec.duration_s(), rec.fs_hz);
        rels.push(rel);
    }
    let manifest = CorpusManifest::from_files(&out, &rels, "biosemi32")?;
    manifest.save(&out.join("manifest.json"))?;
    println!("wrote {} (content hash {})", out.join("manifest.json").display(), manifest.content_hash);
    println!("next: pdeeg preprocess --in {} --out seg/", out.join("manifest.json").display());
    Ok(())
}
