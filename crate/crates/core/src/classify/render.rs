use std::fmt::Write;

use super::cart::{CartNode, TreeModel};
use super::levels_of;

fn join(levels: &[usize]) -> String {
    levels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn split_text(model: &TreeModel, feature: usize, left_levels: u64) -> String {
    format!(
        "{} in {{{}}}",
        model.features[feature],
        join(&levels_of(left_levels))
    )
}

fn leaf_text(counts: &[usize; 3], class: usize) -> String {
    format!("class {class} ({}/{}/{})", counts[0], counts[1], counts[2])
}

/// Graphviz source; the left edge of each split is the `yes` branch.
pub fn tree_to_dot(model: &TreeModel) -> String {
    fn walk(model: &TreeModel, node: &CartNode, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        match node {
            CartNode::Leaf { counts, class } => {
                writeln!(
                    out,
                    "  n{id} [label=\"{}\", style=rounded];",
                    leaf_text(counts, *class)
                )
                .unwrap();
            }
            CartNode::Split {
                feature,
                left_levels,
                counts,
                left,
                right,
                ..
            } => {
                let n: usize = counts.iter().sum();
                writeln!(
                    out,
                    "  n{id} [label=\"{}\\nn={n}\"];",
                    split_text(model, *feature, *left_levels)
                )
                .unwrap();
                let l = walk(model, left, next, out);
                let r = walk(model, right, next, out);
                writeln!(out, "  n{id} -> n{l} [label=\"yes\"];").unwrap();
                writeln!(out, "  n{id} -> n{r} [label=\"no\"];").unwrap();
            }
        }
        id
    }
    let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    walk(model, &model.root, &mut 0, &mut out);
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

const COL: f64 = 190.0;
const ROW: f64 = 90.0;
const BOX_W: f64 = 176.0;
const BOX_H: f64 = 40.0;

/// Static SVG drawing: leaves on a grid, each split centered over its children.
pub fn tree_to_svg(model: &TreeModel) -> String {
    struct Placed {
        x: f64,
        y: f64,
        text: String,
        leaf: bool,
    }
    fn place(
        model: &TreeModel,
        node: &CartNode,
        depth: usize,
        next_leaf: &mut usize,
        boxes: &mut Vec<Placed>,
        edges: &mut Vec<(usize, usize, &'static str)>,
    ) -> usize {
        let y = 20.0 + depth as f64 * ROW;
        match node {
            CartNode::Leaf { counts, class } => {
                let x = 10.0 + *next_leaf as f64 * COL;
                *next_leaf += 1;
                boxes.push(Placed {
                    x,
                    y,
                    text: leaf_text(counts, *class),
                    leaf: true,
                });
            }
            CartNode::Split {
                feature,
                left_levels,
                left,
                right,
                ..
            } => {
                let l = place(model, left, depth + 1, next_leaf, boxes, edges);
                let r = place(model, right, depth + 1, next_leaf, boxes, edges);
                let x = (boxes[l].x + boxes[r].x) / 2.0;
                boxes.push(Placed {
                    x,
                    y,
                    text: split_text(model, *feature, *left_levels),
                    leaf: false,
                });
                let id = boxes.len() - 1;
                edges.push((id, l, "yes"));
                edges.push((id, r, "no"));
            }
        }
        boxes.len() - 1
    }
    let mut boxes = Vec::new();
    let mut edges = Vec::new();
    let mut leaves = 0;
    place(model, &model.root, 0, &mut leaves, &mut boxes, &mut edges);
    let width = 20.0 + leaves as f64 * COL;
    let height = 40.0 + (model.depth() as f64 + 1.0) * ROW;
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"Helvetica\" font-size=\"11\">"
    )
    .unwrap();
    for (a, b, label) in &edges {
        let (pa, pb) = (&boxes[*a], &boxes[*b]);
        let (x1, y1) = (pa.x + BOX_W / 2.0, pa.y + BOX_H);
        let (x2, y2) = (pb.x + BOX_W / 2.0, pb.y);
        writeln!(
            out,
            "  <line x1=\"{x1}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y2}\" stroke=\"#555\"/>"
        )
        .unwrap();
        writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#555\">{label}</text>",
            (x1 + x2) / 2.0,
            (y1 + y2) / 2.0
        )
        .unwrap();
    }
    for b in &boxes {
        let fill = if b.leaf { "#e8f0e0" } else { "#f4f4f4" };
        writeln!(
            out,
            "  <rect x=\"{}\" y=\"{}\" width=\"{BOX_W}\" height=\"{BOX_H}\" rx=\"{}\" fill=\"{fill}\" stroke=\"#333\"/>",
            b.x,
            b.y,
            if b.leaf { 8 } else { 0 }
        )
        .unwrap();
        writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            b.x + BOX_W / 2.0,
            b.y + BOX_H / 2.0 + 4.0,
            escape(&b.text)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{fit_cart, CartParams, Dataset};

    fn model() -> TreeModel {
        let rows: Vec<Vec<usize>> = (0..24).map(|i| vec![1 + i % 3, 1 + i % 2]).collect();
        let labels = (0..24).map(|i| i % 3).collect();
        let d = Dataset::new(vec!["a".into(), "b".into()], vec![3, 2], &rows, labels).unwrap();
        fit_cart(&d, &CartParams::default()).unwrap()
    }

    #[test]
    fn dot_has_every_node() {
        let m = model();
        let dot = tree_to_dot(&m);
        assert!(dot.starts_with("digraph tree {"));
        assert_eq!(dot.matches("style=rounded").count(), m.n_leaves());
        assert_eq!(dot.matches("->").count(), 2 * (m.n_leaves() - 1));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let m = model();
        let svg = tree_to_svg(&m);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 2 * m.n_leaves() - 1);
    }
}
