// Entry point: bridge endpoint comes from one URL query parameter,
// e.g. index.html?bridge=ws://127.0.0.1:9090/

import { BridgeClient } from './bridge';
import { Renderer } from './render';

function bridgeUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get('bridge') ?? 'ws://127.0.0.1:9090/';
}

export function start(root: HTMLElement): BridgeClient {
  let renderer: Renderer;
  const client = new BridgeClient(bridgeUrl(), (state, connected) => {
    renderer.update(state, connected);
  });
  renderer = new Renderer(root, (uav, service, args) => {
    client.callService(uav, service, args);
  });
  client.connect();
  return client;
}

if (typeof document !== 'undefined') {
  const root = document.getElementById('app');
  if (root) start(root);
}
