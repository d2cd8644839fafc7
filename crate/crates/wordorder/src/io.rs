//! Line-oriented text files: corpora, bag files, vocabularies and outputs.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use wordorder_core::{TokenSequence, VocabError, Vocabulary};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: invalid UTF-8", path.display())]
    Encoding { path: PathBuf, line: usize },
    #[error("{}: {source}", path.display())]
    Vocab {
        path: PathBuf,
        #[source]
        source: VocabError,
    },
}

fn io_error(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads `path` as UTF-8 lines. A final newline does not start an extra line
/// and a trailing `\r` is dropped.
pub fn read_lines(path: &Path) -> Result<Vec<String>, IoError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    let mut lines = Vec::new();
    let mut rest: &[u8] = &bytes;
    let mut number = 0;
    while !rest.is_empty() {
        number += 1;
        let (line, tail) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, &[][..]),
        };
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        let text = std::str::from_utf8(line).map_err(|_| IoError::Encoding {
            path: path.to_path_buf(),
            line: number,
        })?;
        lines.push(text.to_string());
        rest = tail;
    }
    Ok(lines)
}

/// One whitespace-tokenized sentence per line; unknown words map to the unknown id.
pub fn load_corpus(path: &Path, vocab: &Vocabulary) -> Result<Vec<TokenSequence>, IoError> {
    Ok(read_lines(path)?.iter().map(|l| vocab.encode(l)).collect())
}

/// Writes each line followed by `\n`.
pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut text = String::new();
    for l in lines {
        text.push_str(l.as_ref());
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    let lines = read_lines(path)?;
    let mut text = lines.join("\n");
    text.push('\n');
    Ok(text)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| io_error(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Vocabulary file: one surface form per line, line number = id.
pub fn load_vocab(path: &Path) -> Result<Vocabulary, IoError> {
    let text = read_text(path)?;
    Vocabulary::from_text(&text).map_err(|source| IoError::Vocab {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<(), IoError> {
    write_text(path, &vocab.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use wordorder_core::UnknownMode;

    fn file(bytes: &[u8]) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), bytes).unwrap();
        f
    }

    #[test]
    fn corpus_lines_map_through_the_vocabulary() {
        let vocab = Vocabulary::from_words(UnknownMode::Single, ["a", "b"]);
        let f = file(b"a b\n");
        assert_eq!(
            load_corpus(f.path(), &vocab).unwrap(),
            vec![vec![vocab.id("a"), vocab.id("b")]]
        );
        let f = file(b"a z\n");
        assert_eq!(
            load_corpus(f.path(), &vocab).unwrap(),
            vec![vec![vocab.id("a"), vocab.unk()]]
        );
        let f = file(b"");
        assert!(load_corpus(f.path(), &vocab).unwrap().is_empty());
    }

    #[test]
    fn line_structure_is_preserved() {
        let f = file(b"x y\r\n\nz");
        assert_eq!(read_lines(f.path()).unwrap(), ["x y", "", "z"]);
    }

    #[test]
    fn bad_encoding_names_the_line() {
        let f = file(b"fine\nalso fine\nbad \xff byte\n");
        match read_lines(f.path()) {
            Err(IoError::Encoding { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_lines(Path::new("/definitely/not/here")),
            Err(IoError::Io { .. })
        ));
    }

    #[test]
    fn vocabulary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let vocab = Vocabulary::from_words(UnknownMode::Ptb, ["the", "cat", "'re"]);
        save_vocab(&path, &vocab).unwrap();
        assert_eq!(load_vocab(&path).unwrap(), vocab);
        write_text(&path, "<s>\nnope\n").unwrap();
        assert!(matches!(load_vocab(&path), Err(IoError::Vocab { .. })));
    }
}
