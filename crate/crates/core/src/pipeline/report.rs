use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::classify::{tree_to_dot, tree_to_svg, TreeModel};
use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::metrics::format_sig;

/// Center table: feature name, the `AVG SD 0 1 2 Arg1` header, one row per cluster id.
pub fn render_center_table(model: &ClusterModel) -> String {
    let mut out = format!("{}\n\n\tAVG\tSD\t0\t1\t2\tArg1\n", model.feature);
    for (i, c) in model.centers.iter().enumerate() {
        let cells: Vec<String> = c.iter().map(|v| format_sig(*v, 10)).collect();
        writeln!(out, "{}\t{}", i + 1, cells.join("\t")).unwrap();
    }
    out
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    written.push(path);
    Ok(())
}

/// Center tables for `models`, plus the tree drawn as SVG and Graphviz source.
pub fn write_report(
    dir: &Path,
    models: &[&ClusterModel],
    tree: &TreeModel,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    for m in models {
        write(
            dir.join(format!("centers_{}.txt", m.feature)),
            &render_center_table(m),
            &mut written,
        )?;
    }
    write(dir.join("tree.svg"), &tree_to_svg(tree), &mut written)?;
    write(dir.join("tree.dot"), &tree_to_dot(tree), &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::fit_kmeans_auto;
    use crate::clustering::ClusterConfig;
    use crate::descriptors::{DescriptorMatrix, DescriptorRow};

    #[test]
    fn table_layout() {
        let rows = (0..40)
            .map(|i| {
                let c = if i % 2 == 0 { 10.0 } else { 100.0 };
                DescriptorRow::from_array([c + i as f64 * 0.01, 1.0, 0.4, 0.3, 0.2, 0.01])
            })
            .collect();
        let m = DescriptorMatrix {
            feature: "textmind_body".into(),
            users: (0..40).map(|i| format!("u{i}")).collect(),
            rows,
        };
        let model = fit_kmeans_auto(
            &m,
            &ClusterConfig {
                k_max: 3,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let t = render_center_table(&model);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "textmind_body");
        assert_eq!(lines[2], "\tAVG\tSD\t0\t1\t2\tArg1");
        assert_eq!(lines.len(), 3 + model.k);
        assert!(lines[3].starts_with("1\t"));
        assert_eq!(lines[3].split('\t').count(), 7);
    }
}
