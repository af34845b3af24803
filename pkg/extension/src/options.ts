// Options page: persists the service URL, default strategies, and the
// comparison-view toggle in extension sync storage. The LLM API key is
// configured on the local service, never here.

import { ALL_STRATEGIES, Strategy, normalizeSettings } from './lib';

const urlInput = document.getElementById('service-url') as HTMLInputElement;
const comparisonInput = document.getElementById('show-comparison') as HTMLInputElement;
const statusEl = document.getElementById('status') as HTMLElement;
const strategyInputs = new Map<Strategy, HTMLInputElement>(
  ALL_STRATEGIES.map((s) => [s, document.getElementById(`strategy-${s}`) as HTMLInputElement]),
);

async function restore(): Promise<void> {
  const stored = await chrome.storage.sync.get('settings');
  const settings = normalizeSettings(stored.settings);
  urlInput.value = settings.serviceBaseUrl;
  comparisonInput.checked = settings.showComparison;
  for (const [strategy, input] of strategyInputs) {
    input.checked = settings.defaultStrategies.includes(strategy);
  }
}

async function save(event: Event): Promise<void> {
  event.preventDefault();
  const chosen = ALL_STRATEGIES.filter((s) => strategyInputs.get(s)?.checked);
  if (chosen.length === 0) {
    statusEl.textContent = 'Select at least one strategy.';
    return;
  }
  const settings = normalizeSettings({
    serviceBaseUrl: urlInput.value,
    defaultStrategies: chosen,
    showComparison: comparisonInput.checked,
  });
  await chrome.storage.sync.set({ settings });
  urlInput.value = settings.serviceBaseUrl;
  statusEl.textContent = 'Saved.';
  setTimeout(() => {
    statusEl.textContent = '';
  }, 1500);
}

document.getElementById('options-form')?.addEventListener('submit', (e) => void save(e));
void restore();
