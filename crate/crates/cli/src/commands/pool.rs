use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mm3d_core::io::csvio::{create, open, read_estimates_csv, write_gamma_csv, EstimateRow};
use mm3d_core::pooling::{pool, pool_template, TemplateItem};

use crate::config::{echo, load_file, need, usage};
use crate::PoolArgs;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileCfg {
    estimates: Option<PathBuf>,
    template: Option<bool>,
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    command: &'static str,
    estimates: PathBuf,
    template: bool,
    out: PathBuf,
}

fn template_items(rows: &[&EstimateRow]) -> anyhow::Result<Vec<TemplateItem>> {
    let mut by_item: BTreeMap<&str, Vec<&EstimateRow>> = BTreeMap::new();
    for row in rows {
        by_item.entry(row.item_id.as_str()).or_default().push(row);
    }
    let mut items = Vec::with_capacity(by_item.len());
    for (item_id, rows) in by_item {
        let kind = rows[0].kind;
        if rows.iter().any(|r| r.kind != kind) {
            return Err(usage(format!("item {item_id:?} mixes still and video rows")));
        }
        let estimates = rows
            .iter()
            .map(|r| r.weighted_estimate())
            .collect::<Result<Vec<_>, _>>()?;
        items.push(TemplateItem { kind, estimates });
    }
    Ok(items)
}

pub fn run(args: &PoolArgs) -> anyhow::Result<()> {
    let file: FileCfg = load_file(args.config.as_deref())?;
    let resolved = Resolved {
        command: "pool",
        estimates: need(args.estimates.clone(), file.estimates, "estimates")?,
        template: args.template || file.template.unwrap_or(false),
        out: need(args.out.clone(), file.out, "out")?,
    };
    echo(&resolved)?;

    let rows = read_estimates_csv(open(&resolved.estimates)?)?;
    let mut by_subject: BTreeMap<&str, Vec<&EstimateRow>> = BTreeMap::new();
    for row in &rows {
        by_subject.entry(row.subject_id.as_str()).or_default().push(row);
    }

    let mut pooled = Vec::with_capacity(by_subject.len());
    for (subject, rows) in by_subject {
        let gamma = if resolved.template {
            pool_template(&template_items(&rows)?)?
        } else {
            let estimates = rows
                .iter()
                .map(|r| r.weighted_estimate())
                .collect::<Result<Vec<_>, _>>()?;
            pool(&estimates)?
        };
        pooled.push((
            subject.to_string(),
            gamma.to_vector().iter().copied().collect::<Vec<f64>>(),
        ));
    }

    write_gamma_csv(create(&resolved.out)?, "subject_id", &pooled)?;
    Ok(())
}
