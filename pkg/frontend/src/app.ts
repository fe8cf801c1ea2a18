import { ApiClient } from "./api.js";
import { buildDashboard, clusterBadges } from "./dashboard.js";
import { ReviewSession } from "./session.js";
import type { TaskView } from "./types.js";

/**
 * Minimal DOM wiring for the two screens. Keyboard-first: Enter submits the
 * current draft and jumps to the next unlabeled task; Ctrl+ArrowDown skips
 * ahead without submitting.
 */
export function mountApp(root: HTMLElement, baseUrl = ""): void {
  const client = new ApiClient(baseUrl);
  const session = new ReviewSession(client);

  root.innerHTML = `
    <header><h1>Batch review</h1><div id="summary"></div></header>
    <section id="tasks"></section>
    <section>
      <div id="progress"></div>
      <button id="advance" disabled>Advance iteration</button>
    </section>
    <section id="dashboard"><h2>Iterations</h2><div id="report"></div>
      <div id="clusters"></div></section>
  `;

  const taskList = root.querySelector("#tasks") as HTMLElement;
  const progressEl = root.querySelector("#progress") as HTMLElement;
  const advanceBtn = root.querySelector("#advance") as HTMLButtonElement;

  function renderTask(view: TaskView, active: boolean): string {
    const cluster =
      view.task.cluster_id === null ? "" : `<span class="badge">c${view.task.cluster_id}</span>`;
    const score =
      view.task.score === null ? "" : `<span class="score">${view.task.score.toFixed(3)}</span>`;
    const audio = view.task.audio_ref
      ? `<audio controls preload="none" src="${client.audioUrl(view.task.sample_id)}"></audio>`
      : `<code>${view.task.sample_id}</code>`;
    const error = view.errorMessage
      ? `<div class="error">${view.errorMessage}</div>`
      : "";
    return `
      <div class="task ${active ? "active" : ""} ${view.saveStatus}"
           data-id="${view.task.sample_id}">
        ${audio} ${cluster} ${score}
        <input type="text" value="${view.draft.replace(/"/g, "&quot;")}"
               ${view.saveStatus === "saved" ? "readonly" : ""} />
        <span class="status">${view.saveStatus}</span>
        ${error}
      </div>`;
  }

  function render(): void {
    if (session.isEmpty) {
      taskList.innerHTML = `<p class="empty">Awaiting selection: no pending batch.</p>`;
      progressEl.textContent = "";
      advanceBtn.disabled = true;
      return;
    }
    const current = session.current();
    taskList.innerHTML = session
      .tasks()
      .map((v) => renderTask(v, v === current))
      .join("");
    const p = session.progress();
    progressEl.textContent = `${p.labeled}/${p.total} labeled`;
    advanceBtn.disabled = !p.canAdvance;
    const activeInput = taskList.querySelector(".task.active input") as HTMLInputElement | null;
    activeInput?.focus();
  }

  async function renderDashboard(): Promise<void> {
    const report = await client.getReport().catch(() => null);
    const model = buildDashboard(report);
    const reportEl = root.querySelector("#report") as HTMLElement;
    if (model.kind === "empty") {
      reportEl.innerHTML = `<p class="empty">No iterations yet.</p>`;
    } else {
      reportEl.innerHTML = model.rows
        .map(
          (r) =>
            `<div class="iteration">h=${r.iteration} ${r.strategy} ` +
            `batch ${r.batchSize}` +
            (r.medianUncertainty === null
              ? ""
              : ` median U ${r.medianUncertainty.toFixed(4)}`) +
            `</div>`,
        )
        .join("");
    }
    const clusters = await client.getClusters().catch(() => null);
    const clustersEl = root.querySelector("#clusters") as HTMLElement;
    clustersEl.innerHTML = clusters
      ? clusterBadges(clusters)
          .map((b) => `<span class="badge">${b.label}: ${b.size}` +
            (b.quota === null ? "" : ` (quota ${b.quota})`) + `</span>`)
          .join(" ")
      : "";
  }

  taskList.addEventListener("input", (event) => {
    const input = event.target as HTMLInputElement;
    session.setDraft(input.value);
  });

  taskList.addEventListener("keydown", async (event) => {
    const key = event as KeyboardEvent;
    if (key.key === "Enter") {
      key.preventDefault();
      await session.submitCurrent();
      session.nextUnlabeled();
      render();
    } else if (key.key === "ArrowDown" && key.ctrlKey) {
      key.preventDefault();
      session.next();
      render();
    }
  });

  advanceBtn.addEventListener("click", async () => {
    await session.advance();
    await session.load();
    render();
    await renderDashboard();
  });

  session
    .load()
    .then(() => {
      render();
      return renderDashboard();
    })
    .catch((error) => {
      taskList.innerHTML = `<p class="error">Cannot reach the service: ${error}</p>`;
    });
}
