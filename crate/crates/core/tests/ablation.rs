use patreid::ablation::{
    region_ablate, render_ablation_report, row_marks, run_ablation, AblationCondition, AblationData, AblationRow,
    AblationSchedule, AblationTable, BackboneEntry, CellMark, Region,
};
use patreid::classifier::{attach_zero_head, ClassifierSchedule, TrainMode};
use patreid::encoder::{Backbone, Encoder};
use patreid::inpaint::{Arch, ArchitectureConfig};
use patreid::synthetic::{generate_dataset_with, SyntheticConfig};

const B: CellMark = CellMark { best: true, worst: false };
const I: CellMark = CellMark { best: false, worst: true };
const N: CellMark = CellMark { best: false, worst: false };
const BI: CellMark = CellMark { best: true, worst: true };

fn row(backbone: Backbone, values: [f64; 7]) -> AblationRow {
    AblationRow { backbone, mode: TrainMode::Deep, accuracy: values.map(Some) }
}

#[test]
fn marks_follow_the_published_deep_table() {
    let table = AblationTable {
        rows: vec![
            row(Arch::Lama.into(), [0.89, 0.96, 0.93, 0.99, 0.98, 0.94, 0.99]),
            row(Arch::AotGan.into(), [0.75, 0.88, 0.85, 0.82, 0.89, 0.93, 0.97]),
        ],
        skipped: vec![],
    };
    let report = render_ablation_report(&table);
    assert_eq!(report.marks[0], [I, B, N, B, N, I, N]);
    assert_eq!(report.marks[1], [I, B, N, I, N, B, N]);
    let lama = report.text.lines().find(|l| l.starts_with("lama")).unwrap();
    let cells: Vec<&str> = lama.split('|').map(str::trim).collect();
    assert_eq!(cells, ["lama", "*0.89*", "**0.96**", "0.93", "**0.99**", "0.98", "*0.94*", "0.99"]);
    assert!(report.csv.starts_with("algorithm,mode,background,fish,pattern,no_background,no_fish,no_pattern,all\n"));
    assert!(report.csv.contains("\nlama,deep,0.89,0.96,0.93,0.99,0.98,0.94,0.99\n"));
}

#[test]
fn constant_row_marks_everything_and_ties_share_marks() {
    assert_eq!(row_marks(&[Some(0.17); 7]), [BI; 7]);
    let tied = row_marks(&[0.93, 0.76, 0.93, 0.97, 0.92, 0.92, 0.96].map(Some));
    assert_eq!(tied, [B, I, B, B, I, I, N]);
    let missing = row_marks(&[None, Some(0.5), Some(0.6), None, None, None, Some(0.6)]);
    assert_eq!(missing, [N, I, B, N, N, N, N]);
}

#[test]
fn csv_round_trips() {
    let mut table = AblationTable {
        rows: vec![row(Backbone::Baseline, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])],
        skipped: vec![],
    };
    table.rows.push(AblationRow { backbone: Arch::DeepFillV2.into(), mode: TrainMode::Shallow, accuracy: [None; 7] });
    let dir = tempfile::tempdir().unwrap();
    render_ablation_report(&table).write(dir.path()).unwrap();
    assert_eq!(AblationTable::read_csv(&dir.path().join("ablation.csv")).unwrap(), table);
    assert!(dir.path().join("ablation.txt").exists());
}

fn synthetic(n_ind: usize, n_per: usize, size: usize) -> AblationData {
    let mut cfg = SyntheticConfig::new(n_ind, n_per, 3);
    cfg.size = size;
    let data = generate_dataset_with(&cfg).unwrap();
    AblationData::new(data.classification, data.classification_regions).unwrap()
}

#[test]
fn synthetic_regions_are_pixel_exact() {
    let data = synthetic(3, 6, 32);
    for (i, s) in data.samples().iter().enumerate() {
        let regions = data.regions(i);
        let out = region_ablate(&s.image, regions, AblationCondition::Only(Region::Pattern)).unwrap();
        let any_channel = |y, x| (0..3).any(|c| out.get(y, x, c) != 0.0);
        for y in 0..32 {
            for x in 0..32 {
                let visible = regions.pattern.get(y, x);
                let source_nonzero = (0..3).any(|c| s.image.get(y, x, c) != 0.0);
                assert_eq!(any_channel(y, x), visible && source_nonzero);
            }
        }
        assert!(regions.background.intersection(&regions.fish).unwrap().is_empty_mask());
        assert!(regions.background.intersection(&regions.pattern).unwrap().is_empty_mask());
        let cover = regions.background.union(&regions.fish).unwrap().union(&regions.pattern).unwrap();
        assert_eq!(cover.count(), 32 * 32);
    }
}

#[test]
fn grid_is_complete_and_skips_are_reported() {
    let data = synthetic(3, 10, 32);
    let mut cfg = ArchitectureConfig::desk(Arch::DeepFillV2);
    cfg.base_channels = 4;
    let entries = vec![
        BackboneEntry {
            backbone: Arch::DeepFillV2.into(),
            encoder: Ok(Encoder::random(Arch::DeepFillV2, cfg.clone(), 0, (32, 32)).unwrap()),
        },
        BackboneEntry { backbone: Backbone::Baseline, encoder: Ok(Encoder::baseline(cfg, 0, (32, 32)).unwrap()) },
        BackboneEntry { backbone: Arch::Lama.into(), encoder: Err("no lama checkpoint".into()) },
    ];
    let schedule = AblationSchedule {
        classifier: ClassifierSchedule { epochs: 1, batch_size: 8, ..Default::default() },
        ..Default::default()
    };
    let table = run_ablation(&entries, &TrainMode::ALL, &data, &schedule).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.len(), 2 * 2 * 7);
    assert_eq!(table.skipped.len(), 2);
    for r in &table.rows {
        assert!(r.accuracy.iter().flatten().all(|a| (0.0..=1.0).contains(a)));
    }
    let report = render_ablation_report(&table);
    assert!(report.text.contains("lama (shallow): no lama checkpoint"));

    let again = run_ablation(&entries, &TrainMode::ALL, &data, &schedule).unwrap();
    assert_eq!(table, again);
}

#[test]
fn untrained_baseline_is_near_chance() {
    let data = synthetic(6, 20, 32);
    let enc = Encoder::baseline(ArchitectureConfig::desk(Arch::Lama), 1, (32, 32)).unwrap();
    let clf = attach_zero_head(enc, 6).unwrap();
    let m = clf.evaluate(data.samples()).unwrap();
    assert!((m.accuracy - 1.0 / 6.0).abs() <= 0.1);
}

#[test]
fn rejects_malformed_data() {
    let data = synthetic(2, 4, 32);
    let mut samples = data.samples().to_vec();
    assert!(AblationData::new(samples.clone(), vec![data.regions(0).clone(), data.regions(1).clone()]).is_err());
    samples[0].label = None;
    assert!(AblationData::new(samples, vec![data.regions(0).clone()]).is_err());
    assert_eq!(data.limit_per_class(2).len(), 4);
}
