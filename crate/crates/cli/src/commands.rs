//! One function per subcommand.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine;
use compshare_core::codec::{self, CompositionId};
use compshare_core::model::{
    search_catalog, Catalog, Composition, CompositionDraft, Feature, FeatureId, FeatureRef, PartId, Placement, Rect, Timestamp,
    UserId, Workspace,
};
use compshare_core::preview::{annotation_list, hit_test};
use compshare_core::resolver::UpgradePolicy;
use compshare_core::store::Store;
use compshare_daemon::{CompositionSummary, Daemon};
use compshare_net::{cached_browse, Browse, ClientConfig, Event, NetError, RelayServer, Session};
use compshare_protocol::ids::MsgIds;
use compshare_protocol::relay::{Relay, Rosters, UserTable};
use serde::{Deserialize, Serialize};

use crate::config::{self, Config};
use crate::format;
use crate::{CatalogCommand, Cli, Command, ComposeCommand, Failure, OnOff, Pick};

struct Ctx {
    home: PathBuf,
    relay: Option<String>,
    json: bool,
}

impl Ctx {
    fn store(&self) -> Result<Store, Failure> {
        Ok(Store::open(&self.home)?)
    }

    fn config(&self) -> Result<Config, Failure> {
        let mut cfg = Config::load(&self.home)?.ok_or_else(|| Failure::usage("not connected yet; run `compshare connect` first"))?;
        if let Some(r) = &self.relay {
            cfg.relay = r.clone();
        }
        Ok(cfg)
    }

    async fn session(&self) -> Result<Session, Failure> {
        let cfg = self.config()?;
        let client = ClientConfig::new(cfg.relay, cfg.user, cfg.token);
        Ok(Session::open(&client, self.store()?).await?)
    }

    fn emit<T: Serialize>(&self, doc: &T, text: impl FnOnce() -> String) {
        if self.json {
            match codec::to_canonical(doc) {
                Ok(d) => println!("{}", d.as_str()),
                Err(e) => eprintln!("error: {e}"),
            }
        } else {
            print!("{}", text());
        }
    }
}

pub async fn execute(cli: Cli) -> Result<(), Failure> {
    let ctx = Ctx { home: config::home(cli.home)?, relay: cli.relay, json: cli.json };
    match cli.command {
        Command::Connect { user, token } => connect(&ctx, &user, token).await,
        Command::Contacts => contacts(&ctx).await,
        Command::Comps { user } => comps(&ctx, &user).await,
        Command::Preview { user, composition, out, at } => preview(&ctx, &user, &composition, &out, &at).await,
        Command::Plan { user, composition, pick } => plan(&ctx, &user, &composition, &pick).await,
        Command::Install { user, composition, pick, force } => install(&ctx, &user, &composition, &pick, force).await,
        Command::Share { state } => share(&ctx, state == OnOff::On).await,
        Command::Chat { listen: true, count, .. } => listen(&ctx, count).await,
        Command::Chat { user, text, .. } => {
            chat(&ctx, user.as_deref().unwrap_or_default(), text.as_deref().unwrap_or_default()).await
        }
        Command::Compose(c) => compose(&ctx, c),
        Command::Catalog(c) => catalog(&ctx, c),
        Command::Relay { listen, users, rosters } => relay(&listen, &users, rosters.as_deref()).await,
        Command::Daemon { port } => daemon(&ctx, port).await,
    }
}

fn user_id(raw: &str) -> Result<UserId, Failure> {
    UserId::new(raw).map_err(|e| Failure::usage(e.to_string()))
}

fn feature_id(raw: &str) -> Result<FeatureId, Failure> {
    FeatureId::new(raw).map_err(|e| Failure::usage(e.to_string()))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

async fn connect(ctx: &Ctx, user: &str, token: String) -> Result<(), Failure> {
    let relay = ctx.relay.clone().ok_or_else(|| Failure::usage("--relay is required to connect"))?;
    let cfg = Config { relay, user: user_id(user)?, token };
    let client = ClientConfig::new(cfg.relay.clone(), cfg.user.clone(), cfg.token.clone());
    let session = Session::open(&client, ctx.store()?).await?;
    let roster = session.contacts().await?;
    session.close();
    cfg.save(&ctx.home)?;
    ctx.emit(&roster, || format!("connected to {} as {}\n", cfg.relay, cfg.user));
    Ok(())
}

async fn contacts(ctx: &Ctx) -> Result<(), Failure> {
    let session = ctx.session().await?;
    let roster = session.contacts().await?;
    session.close();
    ctx.emit(&roster, || format::roster(&roster));
    Ok(())
}

/// Live listing when the relay is reachable, the cache otherwise.
async fn browse(ctx: &Ctx, contact: &UserId) -> Result<(Browse, Option<Session>), Failure> {
    match ctx.session().await {
        Ok(s) => {
            let b = s.browse(contact).await?;
            Ok((b, Some(s)))
        }
        Err(f) if f.code == crate::EXIT_NETWORK => match cached_browse(&ctx.store()?, contact)? {
            Some(b) => Ok((b, None)),
            None => Err(f),
        },
        Err(f) => Err(f),
    }
}

#[derive(Serialize)]
struct CompsDoc {
    contact: UserId,
    cached_at: Option<i64>,
    compositions: Vec<CompositionSummary>,
}

async fn comps(ctx: &Ctx, user: &str) -> Result<(), Failure> {
    let contact = user_id(user)?;
    let (b, session) = browse(ctx, &contact).await?;
    if let Some(s) = session {
        s.close();
    }
    let doc = CompsDoc {
        contact: contact.clone(),
        cached_at: b.cached_at.map(|t| t.0),
        compositions: b.compositions.iter().map(|c| CompositionSummary::of(c, &b)).collect(),
    };
    ctx.emit(&doc, || {
        let mut out = format!("{contact}: {} composition(s)", b.compositions.len());
        if let Some(t) = b.cached_at {
            out.push_str(&format!(", cached at {}", format::time(t)));
        }
        out.push('\n');
        let mut rows = vec![vec!["ID".into(), "NAME".into(), "CREATED".into(), "FEATURES".into()]];
        rows.extend(b.compositions.iter().map(|c| {
            vec![format::short(c.id()), c.name().to_string(), format::time(c.created_at()), c.feature_refs().len().to_string()]
        }));
        if !b.compositions.is_empty() {
            out.push_str(&format::table(&rows));
        }
        out
    });
    Ok(())
}

#[derive(Serialize)]
struct Hover {
    x: String,
    y: String,
    part: Option<PartId>,
    feature: Option<FeatureId>,
}

#[derive(Serialize)]
struct PreviewDoc {
    composition: CompositionId,
    screenshot: String,
    annotations: Vec<compshare_core::preview::Annotation>,
    hits: Vec<Hover>,
}

async fn preview(ctx: &Ctx, user: &str, key: &str, out: &Path, at: &[(f64, f64)]) -> Result<(), Failure> {
    let contact = user_id(user)?;
    let (b, session) = browse(ctx, &contact).await?;
    let c = b.find(key)?.clone();
    let store = ctx.store()?;
    let shot = match (&session, store.get_blob(c.screenshot())?) {
        (_, Some(bytes)) => bytes,
        (Some(s), None) => s.screenshot(&contact, &c).await?,
        (None, None) => return Err(NetError::NotFound(format!("screenshot of {} is not cached", c.name())).into()),
    };
    if let Some(s) = session {
        s.close();
    }
    let names = b.planning_catalog(&store.load_catalog()?);
    let annotations = annotation_list(&c, &names);
    let table = format::annotations(&annotations);
    std::fs::create_dir_all(out).map_err(|e| Failure::usage(format!("{}: {e}", out.display())))?;
    let short = format::short(c.id());
    let png = out.join(format!("{short}.png"));
    let txt = out.join(format!("{short}.txt"));
    write(&png, &shot)?;
    write(&txt, table.as_bytes())?;
    let hits: Vec<Hover> = at
        .iter()
        .map(|&(x, y)| {
            let p = hit_test(&c, x, y);
            Hover { x: x.to_string(), y: y.to_string(), part: p.map(|p| p.part.clone()), feature: p.map(|p| p.feature.clone()) }
        })
        .collect();
    let doc = PreviewDoc { composition: *c.id(), screenshot: png.display().to_string(), annotations, hits };
    ctx.emit(&doc, || {
        let mut s = format!("{} ({short}) from {contact}\n{table}", c.name());
        for h in &doc.hits {
            match (&h.part, &h.feature) {
                (Some(p), Some(f)) => s.push_str(&format!("at {},{}: {p} / {f}\n", h.x, h.y)),
                _ => s.push_str(&format!("at {},{}: nothing\n", h.x, h.y)),
            }
        }
        s.push_str(&format!("screenshot {} ({} bytes)\nannotations {}\n", png.display(), shot.len(), txt.display()));
        s
    });
    Ok(())
}

fn selection(pick: &Pick) -> Result<Option<BTreeSet<FeatureId>>, Failure> {
    if pick.select.is_empty() {
        return Ok(None);
    }
    pick.select.iter().map(|s| feature_id(s.trim())).collect::<Result<_, _>>().map(Some)
}

async fn plan(ctx: &Ctx, user: &str, key: &str, pick: &Pick) -> Result<(), Failure> {
    let contact = user_id(user)?;
    let select = selection(pick)?;
    let session = ctx.session().await?;
    let view = session.plan(&contact, key, select.as_ref(), pick.with_composition).await;
    session.close();
    let view = view?;
    ctx.emit(&view.plan, || {
        let mut s = format!("{} ({}) from {contact}", view.composition.name(), format::short(view.composition.id()));
        if let Some(t) = view.cached_at {
            s.push_str(&format!(", cached at {}", format::time(t)));
        }
        s.push('\n');
        s.push_str(&format::plan(&view.plan));
        s
    });
    Ok(())
}

#[derive(Serialize)]
struct InstallDoc {
    events: Vec<compshare_core::resolver::InstallEvent>,
    copied: Option<CompositionId>,
}

async fn install(ctx: &Ctx, user: &str, key: &str, pick: &Pick, force: bool) -> Result<(), Failure> {
    let contact = user_id(user)?;
    let select = selection(pick)?;
    let session = ctx.session().await?;
    let policy = if force { UpgradePolicy::Force } else { UpgradePolicy::Refuse };
    let before = session.store().load_workspace(session.me())?;
    let result = session.install(&contact, key, select.as_ref(), pick.with_composition, policy).await;
    let after = session.store().load_workspace(session.me())?;
    session.close();
    let events = result?;
    let copied = after.compositions().iter().find(|c| before.composition(c.id()).is_none()).cloned();
    let doc = InstallDoc { events, copied: copied.as_ref().map(|c| *c.id()) };
    ctx.emit(&doc, || {
        let mut s = String::new();
        for e in &doc.events {
            s.push_str(&format!("installed {} {} from {}\n", e.feature, e.version, e.source));
        }
        if let Some(c) = &copied {
            s.push_str(&format!("copied composition {} ({})\n", c.name(), format::short(c.id())));
        }
        if s.is_empty() {
            s.push_str("nothing to install\n");
        }
        s
    });
    Ok(())
}

#[derive(Serialize)]
struct ShareDoc {
    sharing: bool,
}

async fn share(ctx: &Ctx, enabled: bool) -> Result<(), Failure> {
    let session = ctx.session().await?;
    let result = session.share(enabled).await;
    session.close();
    let sharing = result?;
    ctx.emit(&ShareDoc { sharing }, || format!("sharing {}\n", if sharing { "on" } else { "off" }));
    Ok(())
}

async fn chat(ctx: &Ctx, user: &str, text: &str) -> Result<(), Failure> {
    let to = user_id(user)?;
    let session = ctx.session().await?;
    let result = session.chat(&to, text).await;
    session.close();
    let msg = result?;
    ctx.emit(&msg, || format!("sent to {}\n", msg.to));
    Ok(())
}

async fn listen(ctx: &Ctx, count: Option<usize>) -> Result<(), Failure> {
    let session = ctx.session().await?;
    let mut events = session.client().subscribe();
    if !ctx.json {
        println!("listening as {}", session.me());
    }
    let mut seen = 0;
    while count.is_none_or(|n| seen < n) {
        tokio::select! {
            ev = events.recv() => match ev {
                Some(Event::Chat(m)) => {
                    seen += 1;
                    ctx.emit(&m, || format!("{}: {}\n", m.from, m.text));
                }
                Some(Event::Disconnected { .. }) | None => return Err(NetError::Disconnected.into()),
                Some(_) => {}
            },
            _ = tokio::signal::ctrl_c() => break,
        }
    }
    session.close();
    Ok(())
}

fn owner(ctx: &Ctx) -> Result<UserId, Failure> {
    Ok(ctx.config()?.user)
}

fn find_own<'w>(w: &'w Workspace, key: &str) -> Result<&'w Composition, Failure> {
    let hits: Vec<_> = w
        .compositions()
        .iter()
        .filter(|c| c.name() == key || (key.len() >= 4 && c.id().to_string().starts_with(key)))
        .collect();
    match hits.as_slice() {
        [c] => Ok(c),
        [] => Err(Failure::usage(format!("no composition matches {key:?}"))),
        _ => Err(Failure::usage(format!("{key:?} matches {} compositions", hits.len()))),
    }
}

fn parse_place(raw: &str) -> Result<Placement, Failure> {
    let bad = || Failure::usage(format!("--place expects PART=FEATURE@x,y,w,h, got {raw:?}"));
    let (part, rest) = raw.split_once('=').ok_or_else(bad)?;
    let (feature, rect) = rest.split_once('@').ok_or_else(bad)?;
    let n: Vec<f64> = rect.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [x, y, w, h] = n.as_slice() else {
        return Err(bad());
    };
    Ok(Placement::new(PartId::new(part)?, feature_id(feature)?, Rect::new(*x, *y, *w, *h)?))
}

fn compose(ctx: &Ctx, cmd: ComposeCommand) -> Result<(), Failure> {
    let store = ctx.store()?;
    let me = owner(ctx)?;
    match cmd {
        ComposeCommand::Capture { name, features, screenshot, place, created_at } => {
            let writer = store.lock()?;
            let mut w = store.load_workspace(&me)?;
            let mut refs = Vec::new();
            for f in &features {
                let id = feature_id(f.trim())?;
                let v = w.installed_version(&id).ok_or_else(|| Failure::usage(format!("{id} is not installed")))?;
                refs.push(FeatureRef::new(id, v));
            }
            let placements = place.iter().map(|p| parse_place(p)).collect::<Result<Vec<_>, _>>()?;
            let digest = writer.put_blob(&read(&screenshot)?)?;
            let created_at = Timestamp(created_at.unwrap_or_else(|| std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0)));
            let c = CompositionDraft { name, owner: me, feature_refs: refs, placements, screenshot: digest, created_at }.seal()?;
            w.add_composition(c.clone())?;
            writer.save_workspace(&w)?;
            if ctx.json {
                println!("{}", codec::serialize_composition(&c).as_str());
            } else {
                println!("captured {} ({})", c.name(), format::short(c.id()));
            }
        }
        ComposeCommand::List => {
            let w = store.load_workspace(&me)?;
            let local = Browse { contact: me.clone(), compositions: w.compositions().to_vec(), features: vec![], cached_at: None };
            let list: Vec<_> = w.compositions().iter().map(|c| CompositionSummary::of(c, &local)).collect();
            ctx.emit(&list, || {
                if list.is_empty() {
                    return "no compositions\n".to_string();
                }
                let mut rows = vec![vec!["ID".into(), "NAME".into(), "FEATURES".into(), "ACTIVE".into()]];
                rows.extend(w.compositions().iter().map(|c| {
                    let active = if w.active() == Some(c.id()) { "*" } else { "" };
                    vec![format::short(c.id()), c.name().to_string(), c.feature_refs().len().to_string(), active.to_string()]
                }));
                format::table(&rows)
            });
        }
        ComposeCommand::Activate { composition } => {
            let writer = store.lock()?;
            let w = store.load_workspace(&me)?;
            let c = find_own(&w, &composition)?.clone();
            writer.save_workspace(&w.set_active(c.id())?)?;
            ctx.emit(c.id(), || format!("active {} ({})\n", c.name(), format::short(c.id())));
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportDoc {
    entries: Vec<ImportEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportEntry {
    feature: Feature,
    /// Base64 payload bytes.
    #[serde(default)]
    payload: Option<String>,
}

fn feature_rows<'a>(features: impl Iterator<Item = &'a Feature>) -> String {
    let mut rows = vec![vec!["ID".into(), "VERSION".into(), "CATEGORY".into(), "NAME".into()]];
    rows.extend(features.map(|f| vec![f.id().to_string(), f.version().to_string(), f.category().to_string(), f.display_name().to_string()]));
    if rows.len() == 1 {
        return "no features\n".to_string();
    }
    format::table(&rows)
}

fn catalog(ctx: &Ctx, cmd: CatalogCommand) -> Result<(), Failure> {
    let store = ctx.store()?;
    match cmd {
        CatalogCommand::Import { file, installed } => {
            let doc: ImportDoc = codec::from_lenient(&read(&file)?).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
            let writer = store.lock()?;
            let mut cat: Catalog = store.load_catalog()?;
            let mut w = if installed { Some(store.load_workspace(&owner(ctx)?)?) } else { None };
            for e in &doc.entries {
                let payload = match &e.payload {
                    Some(b) => Some(Arc::<[u8]>::from(
                        base64::engine::general_purpose::STANDARD
                            .decode(b)
                            .map_err(|err| Failure::usage(format!("payload of {}: {err}", e.feature.id())))?,
                    )),
                    None => None,
                };
                cat.add_category(e.feature.category());
                cat.insert(e.feature.clone(), payload)?;
                if let Some(w) = w.as_mut() {
                    w.install(e.feature.id().clone(), e.feature.version());
                }
            }
            cat.validate()?;
            writer.save_catalog(&cat)?;
            if let Some(w) = &w {
                writer.save_workspace(w)?;
            }
            let n = doc.entries.len();
            ctx.emit(&n, || format!("imported {n} feature(s)\n"));
        }
        CatalogCommand::List => {
            let cat = store.load_catalog()?;
            let all: Vec<&Feature> = cat.features().collect();
            ctx.emit(&all, || feature_rows(all.iter().copied()));
        }
        CatalogCommand::Search { text, category } => {
            let cat = store.load_catalog()?;
            let hits = search_catalog(&cat, category.as_deref(), text.as_deref());
            ctx.emit(&hits, || feature_rows(hits.iter().copied()));
        }
    }
    Ok(())
}

async fn relay(listen: &str, users: &Path, rosters: Option<&Path>) -> Result<(), Failure> {
    let text = |p: &Path| String::from_utf8(read(p)?).map_err(|e| Failure::usage(format!("{}: {e}", p.display())));
    let users = UserTable::parse(&text(users)?).map_err(|e| Failure::usage(e.to_string()))?;
    let rosters = match rosters {
        Some(p) => Rosters::parse(&text(p)?).map_err(|e| Failure::usage(e.to_string()))?,
        None => Rosters::default(),
    };
    let relay = Relay::new(users, rosters, Box::new(MsgIds::from_entropy()));
    let server = RelayServer::bind(listen, relay).await.map_err(|e| Failure::usage(format!("{listen}: {e}")))?;
    println!("relay listening on {}", server.local_addr());
    tokio::select! {
        _ = server.run() => {}
        _ = tokio::signal::ctrl_c() => {}
    }
    Ok(())
}

async fn daemon(ctx: &Ctx, port: u16) -> Result<(), Failure> {
    let cfg = ctx.config()?;
    let store = ctx.store()?;
    let session = match ctx.session().await {
        Ok(s) => Some(s),
        Err(f) => {
            eprintln!("warning: {}; serving cached data only", f.message);
            None
        }
    };
    let d = Arc::new(Daemon::new(store, cfg.user, session));
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await.map_err(|e| Failure::usage(format!("port {port}: {e}")))?;
    println!("daemon listening on http://{}", listener.local_addr().map_err(|e| Failure::usage(e.to_string()))?);
    tokio::select! {
        r = compshare_daemon::serve_listener(d, listener) => r.map_err(|e| Failure { code: crate::EXIT_NETWORK, message: e.to_string() }),
        _ = tokio::signal::ctrl_c() => Ok(()),
    }
}
