use nuggetindex::config::Config;
use nuggetindex::engine::Engine;
use nuggetindex::eval::corpus::synthetic_store;

const RECORDS: usize = 56_990;
const LIMIT_BYTES: u64 = 32 * 1024 * 1024;

#[test]
fn synthetic_store_fits_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("facts.store");
    let mut config = Config {
        storage: Some(path.clone()),
        ..Config::default()
    };
    // the dense graph is rebuilt on open and never written to the store
    config.dense.enabled = false;
    let store = synthetic_store(RECORDS, 1, 7).unwrap();
    {
        let engine = Engine::open(&config).unwrap();
        assert_eq!(engine.import_records(store.records.clone()).unwrap(), RECORDS);
        engine.flush().unwrap();
        let reported = engine.stats().store_bytes.unwrap();
        assert!(reported < LIMIT_BYTES, "{reported} bytes");
    }
    let on_disk = std::fs::metadata(&path).unwrap().len();
    assert!(on_disk < LIMIT_BYTES, "{on_disk} bytes for {RECORDS} records");

    let reopened = Engine::open(&config).unwrap();
    assert_eq!(reopened.len(), RECORDS);
    let sample = &store.records[RECORDS / 2];
    assert_eq!(reopened.get(sample.id).as_ref(), Some(sample));
}
