//! Minimal CoNLL-U reader. Only FORM, UPOS, HEAD and DEPREL are consumed;
//! multiword-token ranges (`1-2`) and empty nodes (`1.1`) are skipped.

use super::{DataError, Example};
use crate::tree::Span;

const COLUMNS: usize = 10;

pub fn parse_conllu(text: &str, subj: Span, obj: Span) -> Result<Vec<Example>, DataError> {
    let mut out = Vec::new();
    let mut current: Option<Example> = None;
    let mut sent_id: Option<String> = None;

    let finish = |ex: Option<Example>, out: &mut Vec<Example>| -> Result<(), DataError> {
        if let Some(mut ex) = ex {
            ex.subj = subj;
            ex.obj = obj;
            ex.validate()?;
            out.push(ex);
        }
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(current.take(), &mut out)?;
            sent_id = None;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("sent_id") {
                sent_id = Some(id.trim_start_matches([' ', '=']).trim().to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(DataError::Parse {
                line: lineno,
                field: "columns".into(),
                message: format!("expected {COLUMNS} tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let ex = current.get_or_insert_with(|| Example {
            id: sent_id.clone().unwrap_or_else(|| format!("sent{}", out.len() + 1)),
            tokens: Vec::new(),
            pos: Vec::new(),
            ner: Vec::new(),
            heads: Vec::new(),
            deprels: Vec::new(),
            subj,
            obj,
            subj_type: "ENTITY".into(),
            obj_type: "ENTITY".into(),
            relation: String::new(),
        });
        let id: usize = cols[0].parse().map_err(|_| DataError::Parse {
            line: lineno,
            field: "ID".into(),
            message: format!("not an integer: {:?}", cols[0]),
        })?;
        if id != ex.tokens.len() + 1 {
            return Err(DataError::Parse {
                line: lineno,
                field: "ID".into(),
                message: format!("expected token id {}, found {id}", ex.tokens.len() + 1),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| DataError::Parse {
            line: lineno,
            field: "HEAD".into(),
            message: format!("not an integer: {:?}", cols[6]),
        })?;
        ex.tokens.push(cols[1].to_string());
        ex.pos.push(cols[3].to_string());
        ex.ner.push("O".into());
        ex.heads.push(head);
        ex.deprels.push(cols[7].to_string());
    }
    finish(current.take(), &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeError;

    const DOC: &str = "# sent_id = fig1\n\
# text = He was not a relative of Mike Cane\n\
1\tHe\the\tPRON\tPRP\t_\t5\tnsubj\t_\t_\n\
2\twas\tbe\tAUX\tVBD\t_\t5\tcop\t_\t_\n\
3\tnot\tnot\tPART\tRB\t_\t5\tneg\t_\t_\n\
4\ta\ta\tDET\tDT\t_\t5\tdet\t_\t_\n\
5\trelative\trelative\tNOUN\tNN\t_\t0\troot\t_\t_\n\
6\tof\tof\tADP\tIN\t_\t8\tcase\t_\t_\n\
7\tMike\tMike\tPROPN\tNNP\t_\t8\tcompound\t_\t_\n\
8\tCane\tCane\tPROPN\tNNP\t_\t5\tnmod\t_\t_\n\
\n";

    #[test]
    fn reads_sentence() {
        let exs = parse_conllu(DOC, Span::new(0, 0), Span::new(6, 7)).unwrap();
        assert_eq!(exs.len(), 1);
        assert_eq!(exs[0].id, "fig1");
        assert_eq!(exs[0].heads, vec![5, 5, 5, 5, 0, 8, 8, 5]);
        assert_eq!(exs[0].pos[4], "NOUN");
    }

    #[test]
    fn skips_multiword_ranges_and_handles_missing_trailing_blank() {
        let doc = "1-2\tdu\t_\t_\t_\t_\t_\t_\t_\t_\n1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n2\tle\tle\tDET\t_\t_\t0\troot\t_\t_";
        let exs = parse_conllu(doc, Span::new(0, 0), Span::new(1, 1)).unwrap();
        assert_eq!(exs[0].tokens, vec!["de", "le"]);
        assert_eq!(exs[0].id, "sent1");
    }

    #[test]
    fn reports_cycles_and_bad_columns() {
        let cyc = "1\ta\t_\tX\t_\t_\t2\tdep\t_\t_\n2\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        assert!(matches!(
            parse_conllu(cyc, Span::new(0, 0), Span::new(1, 1)),
            Err(DataError::InvalidTree { source: TreeError::Cycle(_), .. })
        ));
        assert!(matches!(
            parse_conllu("1\ta\tb\n", Span::new(0, 0), Span::new(0, 0)),
            Err(DataError::Parse { line: 1, .. })
        ));
    }
}
