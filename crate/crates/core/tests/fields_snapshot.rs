use qbc_core::fields::{continuity_modulus, generator_sections, graded_grid, read_snapshot, write_snapshot, AssemblyField};
use qbc_core::pseries::ParamPoint;

#[test]
fn assembly_field_snapshot_round_trip_and_restriction() {
    let handles = vec![ParamPoint::new(1, 0.6), ParamPoint::new(-1, -0.6), ParamPoint::new(0, 0.0)];
    let gens: Vec<_> = generator_sections().into_iter().take(4).collect();
    let f = AssemblyField::new(0.5, 3, graded_grid(3, 4.0), handles, &gens, 1e-10).unwrap();
    let dir = std::env::temp_dir().join(format!("qbc-assembly-{}", std::process::id()));
    write_snapshot(&f.field, &dir).unwrap();
    let back = read_snapshot(&dir).unwrap();
    assert_eq!(back.grid, f.field.grid);
    for (name, _) in &gens {
        let a = continuity_modulus(&f.field, name).unwrap();
        let b = continuity_modulus(&back, name).unwrap();
        assert_eq!(a, b);
        // restriction to the even points agrees with the coarser grid's table
        let idx: Vec<usize> = (0..f.field.grid.len()).step_by(2).collect();
        let r = continuity_modulus(&f.field.restrict(&idx).unwrap(), name).unwrap();
        for (k, row) in r.rows.iter().enumerate() {
            assert_eq!(row.left, f.field.grid[2 * k]);
        }
        assert!(r.max_gap <= 2.0 * a.max_gap + 1e-15);
    }
    let manifest = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"schema\": 1") && manifest.contains("K x C(K)"));
    std::fs::remove_dir_all(&dir).unwrap();
}
