//! Golden-expectation runner for the `corpus/` programs.
//!
//! Every `corpus/NAME.mvl` has a sibling `NAME.expect` holding one or more
//! blocks separated by `---` lines.  Each block names a CLI invocation, the
//! exit code it must produce, and output fragments that must appear:
//!
//! ```text
//! command: verify --totality reachable
//! exit: 0
//! contains: : verified
//! ```

use std::path::{Path, PathBuf};
use std::process::Command;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

struct Block {
    command: Vec<String>,
    exit: i32,
    contains: Vec<String>,
}

fn parse_expect(text: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut cur: Option<Block> = None;
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "---" {
            blocks.extend(cur.take());
            continue;
        }
        if let Some(rest) = line.strip_prefix("command:") {
            blocks.extend(cur.take());
            cur = Some(Block {
                command: rest.split_whitespace().map(str::to_string).collect(),
                exit: 0,
                contains: Vec::new(),
            });
        } else if let Some(rest) = line.strip_prefix("exit:") {
            cur.as_mut().expect("exit: before command:").exit =
                rest.trim().parse().expect("exit code");
        } else if let Some(rest) = line.strip_prefix("contains:") {
            cur.as_mut()
                .expect("contains: before command:")
                .contains
                .push(rest.trim_start().to_string());
        } else {
            panic!("unrecognized .expect line: {line:?}");
        }
    }
    blocks.extend(cur.take());
    blocks
}

#[test]
fn corpus_matches_expectations() {
    let dir = corpus_dir();
    let mut programs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("corpus directory")
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().map_or(false, |x| x == "mvl")).then_some(p)
        })
        .collect();
    programs.sort();
    assert!(!programs.is_empty(), "no corpus programs found in {}", dir.display());

    let mut failures = Vec::new();
    for prog in &programs {
        let expect = prog.with_extension("expect");
        let text = std::fs::read_to_string(&expect)
            .unwrap_or_else(|_| panic!("missing expectations file {}", expect.display()));
        for block in parse_expect(&text) {
            let (sub, flags) = block.command.split_first().expect("empty command");
            let out = Command::new(env!("CARGO_BIN_EXE_mvl"))
                .arg(sub)
                .arg(prog)
                .args(flags)
                .output()
                .expect("run mvl");
            let stdout = String::from_utf8_lossy(&out.stdout);
            let code = out.status.code().unwrap_or(-1);
            let name = prog.file_name().unwrap().to_string_lossy().into_owned();
            if code != block.exit {
                failures.push(format!(
                    "{} `{}`: exit {} (expected {})\n{}",
                    name,
                    block.command.join(" "),
                    code,
                    block.exit,
                    stdout
                ));
                continue;
            }
            for frag in &block.contains {
                if !stdout.contains(frag) {
                    failures.push(format!(
                        "{} `{}`: output missing {:?}\n{}",
                        name,
                        block.command.join(" "),
                        frag,
                        stdout
                    ));
                }
            }
        }
    }
    assert!(failures.is_empty(), "corpus mismatches:\n{}", failures.join("\n"));
}

#[test]
fn corpus_round_trips_through_the_printer() {
    for entry in std::fs::read_dir(corpus_dir()).expect("corpus directory") {
        let p = entry.unwrap().path();
        if p.extension().map_or(true, |x| x != "mvl") {
            continue;
        }
        let src = std::fs::read_to_string(&p).unwrap();
        let ast = mvl::parser::parse(&src)
            .unwrap_or_else(|e| panic!("{} does not parse: {:?}", p.display(), e));
        let printed = mvl::printer::print(&ast);
        let again = mvl::parser::parse(&printed)
            .unwrap_or_else(|e| panic!("{} reprint does not parse: {:?}", p.display(), e));
        assert_eq!(
            mvl::printer::strip(&ast),
            mvl::printer::strip(&again),
            "{} changed across print/parse",
            p.display()
        );
    }
}
