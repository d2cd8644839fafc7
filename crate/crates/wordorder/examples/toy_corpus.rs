//! Writes a synthetic corpus split for trying the `wordorder` command.
//!
//! ```text
//! cargo run --example toy_corpus -- out_dir [train_size] [seed]
//! ```
//!
//! Produces `train.txt`, `dev.txt`, `test.txt` and the scrambled
//! `dev.bags` / `test.bags`.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wordorder::io::write_lines;
use wordorder::toy::{shuffle_tokens, toy_corpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().ok_or("usage: toy_corpus out_dir [train_size] [seed]")?);
    let train_size: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(2000);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1);
    std::fs::create_dir_all(&dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, offset, n) in [("train", 0, train_size), ("dev", 500, 200), ("test", 1000, 500)] {
        let lines = toy_corpus(seed + offset, n);
        write_lines(&dir.join(format!("{name}.txt")), &lines)?;
        if name != "train" {
            let bags: Vec<String> = lines.iter().map(|l| shuffle_tokens(l, &mut rng)).collect();
            write_lines(&dir.join(format!("{name}.bags")), &bags)?;
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}
